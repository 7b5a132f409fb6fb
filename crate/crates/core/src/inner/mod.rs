//! The tower of level functions `f_k^{pq}` and the inner functions
//! `psi^{pq} = lim f_k^{pq}`, `phi^q(x) = sum_p psi^{pq}(x_p)`.
//!
//! Each `f_k^{pq}` is constant on every interval of the level's family `q`
//! (value `a / P_k^{pq}` with integer `a >= 0`), linear across gaps, and
//! constant outside `[-k, k]`.

mod build;
pub mod conditions;

use std::time::Duration;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{KstError, Result};
use crate::exactnum::{PrimeSearch, PrimeSet, Rational};
use crate::grids::{GridLevel, IntervalFamily, Location};

pub use build::{build_base_level, build_next_level};

/// Faithful: prime denominators, disjointness through residues.
/// Relaxed: primes only as large as the windows need, epsilon from the
/// measured image separation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Faithful,
    Relaxed,
}

impl std::str::FromStr for Mode {
    type Err = KstError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "faithful" => Ok(Mode::Faithful),
            "relaxed" => Ok(Mode::Relaxed),
            other => Err(KstError::Parameter(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Faithful => "faithful",
            Mode::Relaxed => "relaxed",
        })
    }
}

/// One `f_k^{pq}`: plateau numerators over the prime `P_k^{pq}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlateauFunction {
    pub p: usize,
    pub q: usize,
    pub level: usize,
    #[serde(with = "crate::exactnum::biguint_string")]
    pub prime: BigUint,
    /// `numerators[i] / prime` is the value on interval `i` of family `q`.
    #[serde(with = "crate::exactnum::biguint_vec_string")]
    pub numerators: Vec<BigUint>,
}

impl PlateauFunction {
    pub fn plateau(&self, i: usize) -> Rational {
        Rational::from_biguint_ratio(&self.numerators[i], &self.prime)
    }

    /// Exact value at `x`; `grid` must be this function's family.
    pub fn eval(&self, grid: &IntervalFamily, x: &Rational) -> Rational {
        match grid.locate(x) {
            Location::Inside(i) => self.plateau(i),
            Location::Gap {
                left: Some(l),
                right: Some(r),
            } => {
                let x0 = &grid.intervals[l].right;
                let x1 = &grid.intervals[r].left;
                let y0 = self.plateau(l);
                let y1 = self.plateau(r);
                let t = (x - x0) / (x1 - x0);
                &y0 + (y1 - &y0) * t
            }
            Location::Gap {
                left: None,
                right: Some(r),
            } => self.plateau(r),
            Location::Gap {
                left: Some(l),
                right: None,
            } => self.plateau(l),
            Location::Gap {
                left: None,
                right: None,
            } => Rational::zero(),
        }
    }

    /// Largest absolute slope over the gaps.
    pub fn max_slope(&self, grid: &IntervalFamily) -> Rational {
        grid.intervals
            .windows(2)
            .zip(self.numerators.windows(2))
            .map(|(iv, a)| {
                let rise = if a[1] >= a[0] { &a[1] - &a[0] } else { &a[0] - &a[1] };
                let run = &iv[1].left - &iv[0].right;
                Rational::from_biguint_ratio(&rise, &self.prime) / run
            })
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// The breakpoints `(x, f(x))` of the piecewise-linear graph.
    pub fn breakpoints(&self, grid: &IntervalFamily) -> Vec<(Rational, Rational)> {
        grid.intervals
            .iter()
            .enumerate()
            .flat_map(|(i, iv)| {
                let v = self.plateau(i);
                [(iv.left.clone(), v.clone()), (iv.right.clone(), v)]
            })
            .collect()
    }
}

/// Everything built at one level `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub k: usize,
    pub gamma: Rational,
    pub epsilon: Rational,
    /// Total interval count over all `(p, q)` collections.
    pub n_k: usize,
    pub grid: GridLevel,
    pub primes: PrimeSet,
    /// Indexed by `(q - 1) * m + (p - 1)`.
    pub functions: Vec<PlateauFunction>,
}

impl Level {
    pub fn m(&self) -> usize {
        self.primes.m
    }

    pub fn function(&self, p: usize, q: usize) -> &PlateauFunction {
        &self.functions[(q - 1) * self.m() + (p - 1)]
    }

    pub fn eval(&self, p: usize, q: usize, x: &Rational) -> Rational {
        self.function(p, q).eval(self.grid.family(q), x)
    }

    pub fn max_slope(&self) -> Rational {
        self.functions
            .iter()
            .map(|f| f.max_slope(self.grid.family(f.q)))
            .max()
            .unwrap_or_else(Rational::zero)
    }
}

#[derive(Clone, Debug)]
pub struct BuildConfig {
    pub m: usize,
    pub depth: usize,
    pub mode: Mode,
    /// Refuse to build a level whose families would exceed this many
    /// intervals each.
    pub max_intervals_per_family: u128,
    /// Relaxed mode enumerates every cell to measure image separation.
    pub max_cells: u128,
    pub prime_search: PrimeSearch,
}

impl BuildConfig {
    pub fn new(m: usize, depth: usize, mode: Mode) -> Self {
        BuildConfig {
            m,
            depth,
            mode,
            max_intervals_per_family: 400_000,
            max_cells: 20_000_000,
            prime_search: PrimeSearch::default(),
        }
    }
}

/// Per-level summary for humans.
#[derive(Clone, Debug, Serialize)]
pub struct LevelReport {
    pub k: usize,
    pub gamma: String,
    pub gamma_f64: f64,
    pub epsilon: String,
    pub epsilon_f64: f64,
    pub n_k: usize,
    pub intervals_per_family: Vec<usize>,
    pub prime_min: String,
    pub prime_max: String,
    pub prime_bits_max: u64,
    pub seconds: f64,
}

impl LevelReport {
    pub(crate) fn new(level: &Level, elapsed: Duration) -> Self {
        let min = level.primes.primes.iter().min().cloned().unwrap_or_default();
        let max = level.primes.primes.iter().max().cloned().unwrap_or_default();
        LevelReport {
            k: level.k,
            gamma: level.gamma.to_string(),
            gamma_f64: level.gamma.to_f64(),
            epsilon: level.epsilon.to_string(),
            epsilon_f64: level.epsilon.to_f64(),
            n_k: level.n_k,
            intervals_per_family: level.grid.families.iter().map(|f| f.len()).collect(),
            prime_min: min.to_string(),
            prime_max: max.to_string(),
            prime_bits_max: max.bits(),
            seconds: elapsed.as_secs_f64(),
        }
    }
}

/// The tower `{f_k^{pq}}` for `k = 1..=K_max`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerFamily {
    pub m: usize,
    pub mode: Mode,
    pub levels: Vec<Level>,
}

impl InnerFamily {
    /// Builds levels `1..=config.depth`; stops with the first error.
    pub fn build(config: &BuildConfig) -> Result<(InnerFamily, Vec<LevelReport>)> {
        if config.m == 0 || config.depth == 0 {
            return Err(KstError::Parameter("m and depth must be positive".into()));
        }
        let mut reports = Vec::new();
        let start = std::time::Instant::now();
        let base = build_base_level(config)?;
        reports.push(LevelReport::new(&base, start.elapsed()));
        let mut family = InnerFamily {
            m: config.m,
            mode: config.mode,
            levels: vec![base],
        };
        for k in 2..=config.depth {
            let start = std::time::Instant::now();
            let level = build_next_level(&family, k, config)?;
            reports.push(LevelReport::new(&level, start.elapsed()));
            family.levels.push(level);
        }
        Ok((family, reports))
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn families_count(&self) -> usize {
        2 * self.m + 1
    }

    /// Level `k` in `1..=depth`.
    pub fn level(&self, k: usize) -> &Level {
        &self.levels[k - 1]
    }

    pub fn deepest(&self) -> &Level {
        self.levels.last().expect("a family has at least one level")
    }

    pub fn eval_f(&self, p: usize, q: usize, k: usize, x: &Rational) -> Rational {
        self.level(k).eval(p, q, x)
    }

    /// `f_depth(x)` and the bound `eps_depth` with
    /// `f_depth(x) <= psi(x) <= f_depth(x) + eps_depth`, valid for
    /// `|x| <= depth` by the sandwich condition (7).
    pub fn eval_psi(&self, p: usize, q: usize, x: &Rational, depth: usize) -> Result<(Rational, Rational)> {
        if depth == 0 || depth > self.depth() {
            return Err(KstError::DepthExceeded(format!(
                "depth {depth} requested, family has {}",
                self.depth()
            )));
        }
        if x.abs() > Rational::from_integer(depth as i64) {
            return Err(KstError::DepthExceeded(format!(
                "|x| = {} exceeds certified range {depth}",
                x.abs().to_f64()
            )));
        }
        let level = self.level(depth);
        Ok((level.eval(p, q, x), level.epsilon.clone()))
    }

    /// `phi^q(x)` at `depth` with bound `m * eps_depth`.
    pub fn eval_phi(&self, q: usize, x: &[Rational], depth: usize) -> Result<(Rational, Rational)> {
        if x.len() != self.m {
            return Err(KstError::Parameter(format!("point has {} coordinates, m = {}", x.len(), self.m)));
        }
        let mut sum = Rational::zero();
        let mut bound = Rational::zero();
        for (p, xp) in x.iter().enumerate() {
            let (v, b) = self.eval_psi(p + 1, q, xp, depth)?;
            sum += &v;
            bound += &b;
        }
        Ok((sum, bound))
    }

    /// `sum_p f_depth^{pq}(x_p)` with no range restriction. The
    /// decomposition uses this as the concrete inner map.
    pub fn phi_at_depth(&self, q: usize, x: &[Rational], depth: usize) -> Rational {
        let level = self.level(depth);
        x.iter()
            .enumerate()
            .map(|(p, xp)| level.eval(p + 1, q, xp))
            .sum()
    }

    /// Overwrite one plateau numerator. Intended for negative controls: the
    /// result generally violates the construction's invariants.
    pub fn set_plateau_numerator(&mut self, k: usize, p: usize, q: usize, index: usize, value: BigUint) {
        let m = self.m;
        self.levels[k - 1].functions[(q - 1) * m + (p - 1)].numerators[index] = value;
    }
}
