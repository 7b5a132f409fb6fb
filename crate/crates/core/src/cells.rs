//! Product cells `C_1 x ... x C_m` of one family `S_k^q`, their image
//! intervals under `phi^q`, and point lookup.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{KstError, Result};
use crate::exactnum::Rational;
use crate::grids::IntervalFamily;
use crate::inner::{InnerFamily, Level};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Cell {
    pub level: usize,
    pub q: usize,
    /// Interval index per coordinate.
    pub indices: Vec<usize>,
}

impl Cell {
    /// `(left, right)` per coordinate.
    pub fn bounds(&self, family: &InnerFamily) -> Vec<(Rational, Rational)> {
        let fam = family.level(self.level).grid.family(self.q);
        self.indices
            .iter()
            .map(|&i| (fam.intervals[i].left.clone(), fam.intervals[i].right.clone()))
            .collect()
    }

    pub fn center(&self, family: &InnerFamily) -> Vec<Rational> {
        let fam = family.level(self.level).grid.family(self.q);
        self.indices.iter().map(|&i| fam.intervals[i].center()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ImageInterval {
    pub low: Rational,
    pub high: Rational,
    pub cell: Cell,
}

/// Closed axis-aligned box, one `(lo, hi)` per coordinate.
pub type BBox = Vec<(Rational, Rational)>;

pub fn cube(m: usize, half_width: &Rational) -> BBox {
    vec![(-half_width, half_width.clone()); m]
}

/// Indices of intervals of `fam` meeting the closed segment `[lo, hi]`.
fn axis_range(fam: &IntervalFamily, lo: &Rational, hi: &Rational) -> std::ops::Range<usize> {
    let start = fam.intervals.partition_point(|iv| &iv.right <= lo);
    let end = fam.intervals.partition_point(|iv| &iv.left < hi);
    start..end.max(start)
}

/// Lazy odometer over the cells of `J_k^q` that meet `bbox`.
pub struct CellIter {
    level: usize,
    q: usize,
    ranges: Vec<std::ops::Range<usize>>,
    current: Option<Vec<usize>>,
}

impl CellIter {
    pub fn count_hint(&self) -> u128 {
        self.ranges.iter().map(|r| r.len() as u128).product()
    }
}

impl Iterator for CellIter {
    type Item = Cell;

    fn next(&mut self) -> Option<Cell> {
        let current = self.current.as_mut()?;
        let out = Cell {
            level: self.level,
            q: self.q,
            indices: current.clone(),
        };
        let mut axis = current.len();
        loop {
            if axis == 0 {
                self.current = None;
                break;
            }
            axis -= 1;
            current[axis] += 1;
            if current[axis] < self.ranges[axis].end {
                break;
            }
            current[axis] = self.ranges[axis].start;
        }
        Some(out)
    }
}

pub fn cells_at_level(family: &InnerFamily, k: usize, q: usize, bbox: &BBox) -> CellIter {
    let fam = family.level(k).grid.family(q);
    let ranges: Vec<_> = bbox.iter().map(|(lo, hi)| axis_range(fam, lo, hi)).collect();
    let current = ranges
        .iter()
        .all(|r| !r.is_empty())
        .then(|| ranges.iter().map(|r| r.start).collect());
    CellIter {
        level: k,
        q,
        ranges,
        current,
    }
}

pub fn image_interval(family: &InnerFamily, cell: &Cell) -> ImageInterval {
    let level = family.level(cell.level);
    let low: Rational = cell
        .indices
        .iter()
        .enumerate()
        .map(|(p, &i)| level.function(p + 1, cell.q).plateau(i))
        .sum();
    let high = &low + Rational::from_integer(family.m as i64) * &level.epsilon;
    ImageInterval {
        low,
        high,
        cell: cell.clone(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DisjointnessReport {
    pub level: usize,
    pub q: usize,
    pub cells: u128,
    pub disjoint: bool,
    /// Two cells whose image intervals meet.
    pub witness: Option<(ImageInterval, ImageInterval)>,
    /// Smallest gap between consecutive images, when there are two or more.
    pub min_gap: Option<Rational>,
}

/// `low` of a cell times `prod_p P^{pq}`, an integer.
fn scaled_low(level: &Level, q: usize, indices: &[usize], cofactors: &[BigUint]) -> BigUint {
    indices
        .iter()
        .enumerate()
        .map(|(p, &i)| &level.function(p + 1, q).numerators[i] * &cofactors[p])
        .sum()
}

/// Sorts the images of all cells meeting `bbox` and compares neighbors.
pub fn assert_images_disjoint(
    family: &InnerFamily,
    k: usize,
    q: usize,
    bbox: &BBox,
    max_cells: u128,
) -> Result<DisjointnessReport> {
    let iter = cells_at_level(family, k, q, bbox);
    let count = iter.count_hint();
    if count > max_cells {
        return Err(KstError::ResourceLimit(format!(
            "{count} cells in level {k} family {q} (limit {max_cells})"
        )));
    }
    let level = family.level(k);
    let primes: Vec<&BigUint> = (1..=family.m).map(|p| &level.function(p, q).prime).collect();
    let denom: BigUint = primes.iter().copied().product();
    let cofactors: Vec<BigUint> = primes.iter().map(|p| &denom / *p).collect();

    let cells: Vec<Cell> = iter.collect();
    let mut lows: Vec<(BigUint, usize)> = cells
        .par_iter()
        .enumerate()
        .map(|(n, c)| (scaled_low(level, q, &c.indices, &cofactors), n))
        .collect();
    lows.par_sort_unstable();

    let width = Rational::from_integer(family.m as i64) * &level.epsilon;
    let mut witness = None;
    let mut min_gap: Option<Rational> = None;
    for w in lows.windows(2) {
        let gap = Rational::from_biguint_ratio(&(&w[1].0 - &w[0].0), &denom);
        if witness.is_none() && gap <= width {
            witness = Some((image_interval(family, &cells[w[0].1]), image_interval(family, &cells[w[1].1])));
        }
        if min_gap.as_ref().is_none_or(|g| &gap < g) {
            min_gap = Some(gap);
        }
    }
    Ok(DisjointnessReport {
        level: k,
        q,
        cells: count,
        disjoint: witness.is_none(),
        witness,
        min_gap,
    })
}

/// Every `(q, cell)` whose open box contains `x`.
pub fn locate_cells(family: &InnerFamily, k: usize, x: &[Rational]) -> Vec<(usize, Cell)> {
    let grid = &family.level(k).grid;
    (1..=family.families_count())
        .filter_map(|q| {
            let fam = grid.family(q);
            let indices: Option<Vec<usize>> = x.iter().map(|xp| fam.interval_containing(xp)).collect();
            indices.map(|indices| (q, Cell { level: k, q, indices }))
        })
        .collect()
}
