//! Interval families `S_k^q`: for each level `k`, `2m+1` discrete families of
//! open intervals, any two of which cover `[-k, k]`.
//!
//! Every family is the same periodic pattern (interval length `L`, gap `g`,
//! period `T = L + g`, `g = L / (4m+2)`), and family `j` is shifted by
//! `j T / (2m+1)`. The shift spacing exceeds `g`, so gaps of different families
//! never meet. The pattern is placed so that 0 is at the center of the common
//! overlap of all families. `T` divides `k`, which puts `±k` in the same phase,
//! inside every family.

use serde::{Deserialize, Serialize};

use crate::error::{KstError, Result};
use crate::exactnum::Rational;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenInterval {
    pub left: Rational,
    pub right: Rational,
}

impl OpenInterval {
    pub fn new(left: Rational, right: Rational) -> Self {
        debug_assert!(left < right);
        OpenInterval { left, right }
    }

    pub fn diameter(&self) -> Rational {
        &self.right - &self.left
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.left < x && x < &self.right
    }

    pub fn center(&self) -> Rational {
        self.left.midpoint(&self.right)
    }
}

/// One family `S_k^q`, sorted left to right.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalFamily {
    pub level: usize,
    pub q: usize,
    pub intervals: Vec<OpenInterval>,
}

/// Where a point falls relative to a family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Inside(usize),
    /// Between `left` and `right` (closed gap). `None` means beyond the
    /// extreme interval on that side.
    Gap {
        left: Option<usize>,
        right: Option<usize>,
    },
}

impl IntervalFamily {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Binary search over the sorted endpoints.
    pub fn locate(&self, x: &Rational) -> Location {
        let i = self.intervals.partition_point(|iv| &iv.right <= x);
        if i < self.intervals.len() && &self.intervals[i].left < x {
            return Location::Inside(i);
        }
        Location::Gap {
            left: i.checked_sub(1),
            right: (i < self.intervals.len()).then_some(i),
        }
    }

    pub fn interval_containing(&self, x: &Rational) -> Option<usize> {
        match self.locate(x) {
            Location::Inside(i) => Some(i),
            Location::Gap { .. } => None,
        }
    }

    /// Closed segments of `[lo, hi]` not covered by this family.
    pub fn uncovered_segments(&self, lo: &Rational, hi: &Rational) -> Vec<(Rational, Rational)> {
        let mut out = Vec::new();
        let mut cursor = lo.clone();
        for iv in &self.intervals {
            if &iv.right <= lo {
                continue;
            }
            if &iv.left >= hi {
                break;
            }
            if iv.left >= cursor {
                out.push((cursor.clone(), iv.left.clone()));
            }
            if iv.right > cursor {
                cursor = iv.right.clone();
            }
        }
        if &cursor <= hi {
            out.push((cursor, hi.clone()));
        }
        out
    }

    fn max_gap(&self) -> Option<Rational> {
        self.intervals
            .windows(2)
            .map(|w| &w[1].left - &w[0].right)
            .max()
    }
}

/// The `2m+1` families of one level together with the pattern parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLevel {
    pub k: usize,
    pub gamma: Rational,
    pub period: Rational,
    pub interval_length: Rational,
    pub gap_length: Rational,
    pub families: Vec<IntervalFamily>,
}

impl GridLevel {
    /// Family `q` in `1..=2m+1`.
    pub fn family(&self, q: usize) -> &IntervalFamily {
        &self.families[q - 1]
    }

    pub fn total_intervals(&self) -> usize {
        self.families.iter().map(IntervalFamily::len).sum()
    }
}

/// Pattern parameters for a level, without materializing intervals.
#[derive(Clone, Debug)]
pub struct GridPlan {
    pub period: Rational,
    pub interval_length: Rational,
    pub gap_length: Rational,
    /// Upper bound on intervals per family.
    pub intervals_per_family: u128,
}

pub fn plan_grid_level(k: usize, gamma: &Rational, m: usize) -> Result<GridPlan> {
    if k == 0 || m == 0 {
        return Err(KstError::Parameter("k and m must be positive".into()));
    }
    let cap = Rational::new(1, k as i64).min(Rational::new(1, 10));
    if !gamma.is_positive() || gamma > &cap {
        return Err(KstError::Parameter(format!(
            "gamma_{k} = {gamma} outside (0, {cap}]"
        )));
    }
    let ratio = 4 * m as i64 + 2;
    // Smallest N with T = k/N and L = T * ratio/(ratio+1) <= gamma.
    let n = (Rational::from_integer(k as i64 * ratio) / (gamma * Rational::from_integer(ratio + 1)))
        .ceil();
    let period = Rational::new(k as i64, n.clone());
    let interval_length = &period * Rational::new(ratio, ratio + 1);
    let gap_length = &period * Rational::new(1, ratio + 1);
    let intervals_per_family = u128::try_from(n * 2 + 2).unwrap_or(u128::MAX);
    Ok(GridPlan {
        period,
        interval_length,
        gap_length,
        intervals_per_family,
    })
}

pub fn build_grid_level(k: usize, gamma: &Rational, m: usize) -> Result<GridLevel> {
    let plan = plan_grid_level(k, gamma, m)?;
    let families_count = 2 * m + 1;
    let t = &plan.period;
    let l = &plan.interval_length;
    let shift = |j: usize| t * Rational::new(j as i64, families_count as i64);
    let origin = -(shift(families_count - 1) + l) * Rational::new(1, 2);
    let kk = Rational::from_integer(k as i64);

    let families = (0..families_count)
        .map(|j| {
            let base = &origin + shift(j);
            // Intervals (base + nT, base + nT + L) meeting [-k, k].
            let n_min: num_bigint::BigInt = ((-&kk - &base - l) / t).floor() + 1;
            let n_max = ((&kk - &base) / t).ceil() - 1;
            let mut intervals = Vec::new();
            let mut n = n_min;
            while n <= n_max {
                let left = &base + t * Rational::from_integer(n.clone());
                let right = &left + l;
                intervals.push(OpenInterval::new(left, right));
                n += 1;
            }
            IntervalFamily {
                level: k,
                q: j + 1,
                intervals,
            }
        })
        .collect();

    Ok(GridLevel {
        k,
        gamma: gamma.clone(),
        period: plan.period,
        interval_length: plan.interval_length,
        gap_length: plan.gap_length,
        families,
    })
}

/// A failed grid invariant, with the offending point or family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GridViolation {
    Diameter { q: usize, index: usize },
    NotDiscrete { q: usize, index: usize },
    GapTooWide { q: usize },
    Anchor { q: usize, anchor: Rational },
    TwoCover { point: Rational, missing: Vec<usize> },
}

/// Checks every family and level invariant. The two-cover check sweeps all
/// endpoints in `[-k, k]` and the midpoints between them with a merge sweep,
/// independent of `locate`.
pub fn check_grid_level(grid: &GridLevel) -> std::result::Result<(), GridViolation> {
    let k = Rational::from_integer(grid.k as i64);
    for fam in &grid.families {
        for (i, iv) in fam.intervals.iter().enumerate() {
            if iv.diameter() > grid.gamma {
                return Err(GridViolation::Diameter { q: fam.q, index: i });
            }
        }
        for (i, w) in fam.intervals.windows(2).enumerate() {
            if w[0].right >= w[1].left {
                return Err(GridViolation::NotDiscrete { q: fam.q, index: i });
            }
        }
        if fam.max_gap().is_some_and(|g| g > grid.gamma) {
            return Err(GridViolation::GapTooWide { q: fam.q });
        }
        for anchor in [-&k, Rational::zero(), k.clone()] {
            if !fam.intervals.iter().any(|iv| iv.contains(&anchor)) {
                return Err(GridViolation::Anchor { q: fam.q, anchor });
            }
        }
    }

    let mut points: Vec<Rational> = grid
        .families
        .iter()
        .flat_map(|f| f.intervals.iter().flat_map(|iv| [iv.left.clone(), iv.right.clone()]))
        .filter(|x| x >= &-&k && x <= &k)
        .chain([-&k, k.clone()])
        .collect();
    points.sort();
    points.dedup();
    let mids: Vec<Rational> = points.windows(2).map(|w| w[0].midpoint(&w[1])).collect();
    let mut probes: Vec<Rational> = points.into_iter().chain(mids).collect();
    probes.sort();
    // One cursor per family, advanced monotonically over the sorted probes.
    let mut cursors = vec![0usize; grid.families.len()];
    for x in &probes {
        let mut missing = Vec::new();
        for (f, cur) in grid.families.iter().zip(cursors.iter_mut()) {
            while *cur < f.intervals.len() && &f.intervals[*cur].right <= x {
                *cur += 1;
            }
            if !f.intervals.get(*cur).is_some_and(|iv| iv.contains(x)) {
                missing.push(f.q);
            }
        }
        if missing.len() > 1 {
            return Err(GridViolation::TwoCover {
                point: x.clone(),
                missing,
            });
        }
    }
    Ok(())
}

/// Exact form of the two-cover property: the uncovered parts of `[-k, k]`
/// of different families are pairwise disjoint closed segments.
pub fn gap_sets_disjoint(grid: &GridLevel) -> bool {
    let k = Rational::from_integer(grid.k as i64);
    let mut segs: Vec<(Rational, Rational, usize)> = grid
        .families
        .iter()
        .flat_map(|f| {
            f.uncovered_segments(&-&k, &k)
                .into_iter()
                .map(move |(a, b)| (a, b, f.q))
        })
        .collect();
    segs.sort();
    segs.windows(2).all(|w| w[0].1 < w[1].0)
}
