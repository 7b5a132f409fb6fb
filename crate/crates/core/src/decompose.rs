//! Outer functions for a compactly supported target: repeated rounds of
//! cell-wise corrections `chi_r^q`, each constant on the images of the cells
//! of one level, accumulated into `g_q = sum_r chi_r^q`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cells::{cells_at_level, cube, image_interval, Cell};
use crate::error::{KstError, Result};
use crate::exactnum::Rational;
use crate::inner::InnerFamily;
use crate::pwl::PiecewiseLinear;
use crate::targets::{Lattice, TargetFunction};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stop {
    Rounds(usize),
    /// Stop once `M_r <= ratio * M_0`.
    Ratio(Rational),
}

#[derive(Clone, Debug)]
pub struct DecomposeConfig {
    /// `l`: the target vanishes outside `[-l-1, l+1]^m`.
    pub support: usize,
    pub stop: Stop,
    /// Points per axis of the residual lattice on `[-l-2, l+2]^m`.
    pub lattice_per_axis: usize,
    /// Interior sample points per axis and cell for the oscillation test.
    pub samples_per_axis: usize,
    /// Multiplier on sampled oscillations.
    pub safety: Rational,
}

impl DecomposeConfig {
    pub fn new(support: usize, stop: Stop) -> Self {
        DecomposeConfig {
            support,
            stop,
            lattice_per_axis: 101,
            samples_per_axis: 3,
            safety: Rational::from_integer(2),
        }
    }
}

/// `chi_r^q` for every `q`, as the continuous closure of the plateau map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundFunction {
    pub r: usize,
    pub level: usize,
    /// Raw closure per family: `(low, v), (high, v)` for every image
    /// interval, plus the two ramp ends.
    pub chi: Vec<PiecewiseLinear>,
    /// `max_q |chi_r^q|` over the stored breakpoints.
    pub envelope: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub r: usize,
    pub k: usize,
    pub m_r: Rational,
    /// Oscillation bound used to admit level `k` (0 for round 0).
    pub oscillation: Rational,
    /// True when the bound is analytic (Lipschitz times cell diameter).
    pub oscillation_certified: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub m: usize,
    pub support: usize,
    pub target: String,
    /// Inner level used to evaluate `phi^q`.
    pub phi_depth: usize,
    pub lattice_per_axis: usize,
    pub trace: Vec<TraceRow>,
    pub rounds: Vec<RoundFunction>,
    pub outer: Vec<PiecewiseLinear>,
    /// False when the rounds stopped for lack of depth before the stop rule.
    pub complete: bool,
    /// `L_h * pitch / 2` on the residual lattice, when `h` is Lipschitz.
    pub lattice_slack: Option<Rational>,
}

impl Decomposition {
    pub fn m_final(&self) -> &Rational {
        &self.trace.last().expect("trace has round 0").m_r
    }

    pub fn rounds_executed(&self) -> usize {
        self.rounds.len()
    }
}

pub fn eval_outer(g: &PiecewiseLinear, t: &Rational) -> Rational {
    g.eval(t)
}

/// `sum_q g_q(phi^q(x))` with `phi` at the decomposition's depth.
pub fn reconstruct(decomp: &Decomposition, family: &InnerFamily, x: &[Rational]) -> Rational {
    decomp
        .outer
        .iter()
        .enumerate()
        .map(|(i, g)| g.eval(&family.phi_at_depth(i + 1, x, decomp.phi_depth)))
        .sum()
}

/// Float evaluation of the same sum: exact `phi`, float interpolation in
/// `g_q`. The error is within a few ulps of the largest `|g_q|`.
pub fn reconstruct_f64(decomp: &Decomposition, family: &InnerFamily, x: &[Rational]) -> f64 {
    decomp
        .outer
        .iter()
        .enumerate()
        .map(|(i, g)| g.eval_f64(family.phi_at_depth(i + 1, x, decomp.phi_depth).to_f64()))
        .sum()
}

/// Residual state over the lattice.
struct State<'a> {
    family: &'a InnerFamily,
    h: &'a TargetFunction,
    decomp: Decomposition,
    k_prev: usize,
    lattice_points: Vec<Vec<Rational>>,
    /// `phi^q` at every lattice point, per family.
    lattice_phi: Vec<Vec<Rational>>,
    lattice_h: Vec<Rational>,
}

impl State<'_> {
    fn residual_at(&self, x: &[Rational]) -> Rational {
        self.h.eval(x) - reconstruct(&self.decomp, self.family, x)
    }

    fn lattice_sup(&self) -> Rational {
        (0..self.lattice_points.len())
            .into_par_iter()
            .map(|n| {
                let h_r: Rational = self
                    .decomp
                    .outer
                    .iter()
                    .zip(&self.lattice_phi)
                    .map(|(g, phi)| g.eval(&phi[n]))
                    .sum();
                (&self.lattice_h[n] - h_r).abs()
            })
            .max()
            .unwrap_or_else(Rational::zero)
    }
}

fn k_box(m: usize, support: usize) -> Vec<(Rational, Rational)> {
    cube(m, &Rational::from_integer(support as i64 + 1))
}

fn cell_inside(bounds: &[(Rational, Rational)], k: &Rational) -> bool {
    bounds.iter().all(|(lo, hi)| lo >= &-k && hi <= k)
}

/// Sample points of the closed cell: an interior grid plus all corners.
fn cell_samples(bounds: &[(Rational, Rational)], per_axis: usize) -> Vec<Vec<Rational>> {
    let axes: Vec<Vec<Rational>> = bounds
        .iter()
        .map(|(lo, hi)| {
            let w = hi - lo;
            let mut v: Vec<Rational> = (0..=per_axis + 1)
                .map(|i| lo + &w * Rational::new(i as i64, per_axis as i64 + 1))
                .collect();
            v.dedup();
            v
        })
        .collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Rational>| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect();
    }
    out
}

/// Upper bound on the oscillation of `h - h_r` over any cell of level `k`
/// meeting `K`, and whether it is analytic.
fn oscillation(state: &State, k: usize, config: &DecomposeConfig) -> (Rational, bool) {
    let level = state.family.level(k);
    if state.decomp.rounds.is_empty() {
        if let Some(l) = state.h.lipschitz.and_then(Rational::from_f64) {
            // h_0 = 0; cells have max-norm diameter at most the interval length.
            return (l * &level.grid.interval_length, true);
        }
    }
    let kb = k_box(state.family.m, config.support);
    let max = (1..=state.family.families_count())
        .flat_map(|q| cells_at_level(state.family, k, q, &kb))
        .collect::<Vec<Cell>>()
        .par_iter()
        .map(|cell| {
            let vals: Vec<Rational> = cell_samples(&cell.bounds(state.family), config.samples_per_axis)
                .iter()
                .map(|x| state.residual_at(x))
                .collect();
            let hi = vals.iter().max().cloned().unwrap_or_else(Rational::zero);
            let lo = vals.iter().min().cloned().unwrap_or_else(Rational::zero);
            hi - lo
        })
        .max()
        .unwrap_or_else(Rational::zero);
    (max * &config.safety, false)
}

fn round_function(state: &State, r: usize, k: usize, m_prev: &Rational, support: usize) -> RoundFunction {
    let family = state.family;
    let m = family.m;
    let inv = Rational::new(1, m as i64 + 1);
    let cap = m_prev * &inv;
    let kk = Rational::from_integer(support as i64 + 1);
    let all = cube(m, &Rational::from_integer(k as i64));
    let margin = Rational::from_integer(m as i64) * &family.level(k).epsilon;

    let chi: Vec<PiecewiseLinear> = (1..=family.families_count())
        .map(|q| {
            let cells: Vec<Cell> = cells_at_level(family, k, q, &all).collect();
            let mut plateaus: Vec<(Rational, Rational, Rational)> = cells
                .par_iter()
                .map(|cell| {
                    let img = image_interval(family, cell);
                    let v = if cell_inside(&cell.bounds(family), &kk) {
                        (state.residual_at(&cell.center(family)) * &inv).clamp(-&cap, cap.clone())
                    } else {
                        Rational::zero()
                    };
                    (img.low, img.high, v)
                })
                .collect();
            plateaus.par_sort_unstable_by(|a, b| a.0.cmp(&b.0));
            let mut points = Vec::with_capacity(2 * plateaus.len() + 2);
            if let Some(first) = plateaus.first() {
                points.push((&first.0 - &margin, Rational::zero()));
            }
            for (low, high, v) in &plateaus {
                points.push((low.clone(), v.clone()));
                points.push((high.clone(), v.clone()));
            }
            if let Some(last) = plateaus.last() {
                points.push((&last.1 + &margin, Rational::zero()));
            }
            PiecewiseLinear::new(points)
        })
        .collect();
    let envelope = chi.iter().map(PiecewiseLinear::max_abs).max().unwrap_or_else(Rational::zero);
    RoundFunction { r, level: k, chi, envelope }
}

/// Runs rounds until the stop rule holds or no deeper level passes the
/// oscillation test; in the latter case the result is flagged incomplete.
pub fn decompose_compact(family: &InnerFamily, h: &TargetFunction, config: &DecomposeConfig) -> Result<Decomposition> {
    let m = family.m;
    if h.m != m {
        return Err(KstError::Parameter(format!("target arity {} but family m = {m}", h.m)));
    }
    if config.support == 0 {
        return Err(KstError::Parameter("support bound l must be positive".into()));
    }
    if let Some(l) = h.support {
        if l > config.support {
            return Err(KstError::Parameter(format!(
                "{} is supported in [-{}, {}]^m, beyond l = {}",
                h.name,
                l + 1,
                l + 1,
                config.support
            )));
        }
    } else {
        return Err(KstError::Parameter(format!("{} has no compact support", h.name)));
    }

    let window = Rational::from_integer(config.support as i64 + 2);
    let lattice = Lattice::new(m, window, config.lattice_per_axis)?;
    let phi_depth = family.depth();
    let lattice_points = lattice.points();
    let lattice_phi: Vec<Vec<Rational>> = (1..=family.families_count())
        .map(|q| lattice_points.par_iter().map(|x| family.phi_at_depth(q, x, phi_depth)).collect())
        .collect();
    let lattice_h: Vec<Rational> = lattice_points.par_iter().map(|x| h.eval(x)).collect();
    let lattice_slack = h
        .lipschitz
        .and_then(Rational::from_f64)
        .map(|l| l * lattice.pitch() * Rational::new(1, 2));

    let mut state = State {
        family,
        h,
        decomp: Decomposition {
            m,
            support: config.support,
            target: h.name.clone(),
            phi_depth,
            lattice_per_axis: config.lattice_per_axis,
            trace: Vec::new(),
            rounds: Vec::new(),
            outer: vec![PiecewiseLinear::zero(); family.families_count()],
            complete: true,
            lattice_slack,
        },
        k_prev: config.support,
        lattice_points,
        lattice_phi,
        lattice_h,
    };
    let m0 = state.lattice_sup();
    state.decomp.trace.push(TraceRow {
        r: 0,
        k: config.support,
        m_r: m0.clone(),
        oscillation: Rational::zero(),
        oscillation_certified: true,
    });
    if m0.is_zero() {
        return Ok(state.decomp);
    }

    loop {
        let m_prev = state.decomp.m_final().clone();
        let done = match &config.stop {
            Stop::Rounds(n) => state.decomp.rounds.len() >= *n,
            Stop::Ratio(ratio) => m_prev <= ratio * &m0,
        };
        if done || m_prev.is_zero() {
            break;
        }
        if !round_step(&mut state, config)? {
            state.decomp.complete = false;
            break;
        }
    }
    Ok(state.decomp)
}

/// One round; `false` when no level deeper than the last one qualifies.
fn round_step(state: &mut State, config: &DecomposeConfig) -> Result<bool> {
    let m = state.family.m;
    let m_prev = state.decomp.m_final().clone();
    let threshold = &m_prev * Rational::new(1, 2 * m as i64 + 2);
    let first = state.k_prev.max(config.support) + 1;
    let mut chosen = None;
    for k in first..=state.family.depth() {
        let (osc, certified) = oscillation(state, k, config);
        if osc < threshold {
            chosen = Some((k, osc, certified));
            break;
        }
    }
    let Some((k, osc, certified)) = chosen else {
        return Ok(false);
    };
    let r = state.decomp.rounds.len() + 1;
    let round = round_function(state, r, k, &m_prev, config.support);
    for (g, chi) in state.decomp.outer.iter_mut().zip(&round.chi) {
        *g = g.add(chi);
    }
    state.decomp.rounds.push(round);
    state.k_prev = k;
    let m_r = state.lattice_sup();
    state.decomp.trace.push(TraceRow {
        r,
        k,
        m_r,
        oscillation: osc,
        oscillation_certified: certified,
    });
    Ok(true)
}
