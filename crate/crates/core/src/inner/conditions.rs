//! Exact checks of the seven construction conditions, one report per
//! condition and level. Relaxed families replace the residue bound (3) with
//! a direct image-disjointness check.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use super::build::{measured_separation, residue_separation};
use super::{InnerFamily, Level, Mode};
use crate::exactnum::{is_prime, Rational};
use crate::grids::check_grid_level;

#[derive(Clone, Debug, Serialize)]
pub struct ConditionCheck {
    pub level: usize,
    pub condition: u8,
    pub passed: bool,
    pub detail: String,
}

impl ConditionCheck {
    fn new(level: usize, condition: u8, failure: Option<String>) -> Self {
        ConditionCheck {
            level,
            condition,
            passed: failure.is_none(),
            detail: failure.unwrap_or_else(|| "ok".into()),
        }
    }
}

/// All conditions at all levels.
pub fn verify(family: &InnerFamily) -> Vec<ConditionCheck> {
    verify_with(family, u128::MAX)
}

/// `max_cells` bounds the enumeration used by the relaxed form of (3).
pub fn verify_with(family: &InnerFamily, max_cells: u128) -> Vec<ConditionCheck> {
    let mut out = Vec::new();
    for level in &family.levels {
        let k = level.k;
        out.push(ConditionCheck::new(k, 1, condition_1(family, k)));
        out.push(ConditionCheck::new(k, 2, condition_2(level)));
        out.push(ConditionCheck::new(k, 3, condition_3(family, level, max_cells)));
        out.push(ConditionCheck::new(k, 4, condition_4(level)));
        out.push(ConditionCheck::new(k, 5, condition_5(level)));
        out.push(ConditionCheck::new(k, 6, condition_6(level)));
        out.push(ConditionCheck::new(k, 7, condition_7(family, k)));
    }
    out
}

pub fn all_passed(checks: &[ConditionCheck]) -> bool {
    checks.iter().all(|c| c.passed)
}

fn condition_1(family: &InnerFamily, k: usize) -> Option<String> {
    let level = family.level(k);
    if !level.epsilon.is_positive() || !level.gamma.is_positive() {
        return Some("epsilon and gamma must be positive".into());
    }
    if level.gamma >= Rational::new(1, k as i64) && k > 1 {
        return Some(format!("gamma_{k} = {} is not below 1/{k}", level.gamma));
    }
    if k > 1 {
        let prev = family.level(k - 1);
        if level.epsilon >= &prev.epsilon * Rational::new(1, 6) {
            return Some(format!("eps_{k} = {} is not below eps_{}/6", level.epsilon, k - 1));
        }
        if level.gamma >= prev.gamma {
            return Some(format!("gamma_{k} does not decrease"));
        }
    }
    None
}

fn condition_2(level: &Level) -> Option<String> {
    check_grid_level(&level.grid).err().map(|v| format!("{v:?}"))
}

fn condition_3(family: &InnerFamily, level: &Level, max_cells: u128) -> Option<String> {
    let m = Rational::from_integer(level.m() as i64);
    let bound = &m * &level.epsilon;
    match family.mode {
        Mode::Faithful => {
            let sep = residue_separation(&level.primes);
            (bound >= sep).then(|| format!("m eps = {bound} is not below {sep}"))
        }
        Mode::Relaxed => match measured_separation(&level.grid, &level.functions, level.m(), max_cells) {
            Ok(Some(sep)) if bound < sep => None,
            Ok(Some(sep)) => Some(format!("images overlap: separation {sep}, width {bound}")),
            Ok(None) => Some("two cells share an image".into()),
            Err(e) => Some(e.to_string()),
        },
    }
}

fn condition_4(level: &Level) -> Option<String> {
    for f in &level.functions {
        let fam = level.grid.family(f.q);
        let z = fam.interval_containing(&Rational::zero())?;
        let a = &f.numerators;
        if a.len() != fam.len() {
            return Some(format!("f^{}{} has {} plateaus for {} intervals", f.p, f.q, a.len(), fam.len()));
        }
        if a[z..].windows(2).any(|w| w[0] > w[1]) {
            return Some(format!("f^{}{} decreases on the positive half-line", f.p, f.q));
        }
        if a[..=z].windows(2).any(|w| w[0] < w[1]) {
            return Some(format!("f^{}{} increases on the negative half-line", f.p, f.q));
        }
        // Constant outside [-k, k]: the extreme intervals contain -k and k.
        let kk = Rational::from_integer(level.k as i64);
        if fam.interval_containing(&kk) != Some(fam.len() - 1) || fam.interval_containing(&-&kk) != Some(0) {
            return Some(format!("family {} does not end at the anchors", f.q));
        }
    }
    None
}

fn condition_5(level: &Level) -> Option<String> {
    if !level.primes.all_distinct() {
        return Some("primes not distinct".into());
    }
    for f in &level.functions {
        if &f.prime != level.primes.get(f.p, f.q) || !is_prime(&f.prime) {
            return Some(format!("P^{}{} is not the recorded prime", f.p, f.q));
        }
        let mut seen = HashSet::with_capacity(f.numerators.len());
        for (i, a) in f.numerators.iter().enumerate() {
            if !seen.insert(a % &f.prime) {
                return Some(format!("f^{}{}: residue of interval {i} repeats", f.p, f.q));
            }
        }
        let fam = level.grid.family(f.q);
        match fam.interval_containing(&Rational::zero()) {
            Some(z) if f.plateau(z).is_zero() => {}
            _ => return Some(format!("f^{}{} is not 0 on the 0-interval", f.p, f.q)),
        }
    }
    None
}

fn condition_6(level: &Level) -> Option<String> {
    let kk = Rational::from_integer(level.k as i64);
    let tol = Rational::new(1, level.m() as i64 + 1);
    for f in &level.functions {
        let fam = level.grid.family(f.q);
        for x in [kk.clone(), -&kk] {
            let v = f.eval(fam, &x);
            if (&v - &kk).abs() >= tol {
                return Some(format!("f^{}{}({x}) = {v}", f.p, f.q));
            }
        }
    }
    None
}

/// Both functions are linear between consecutive points of the union of
/// their breakpoints, so checking the sandwich there (plus `+-j`) is exact.
fn condition_7(family: &InnerFamily, k: usize) -> Option<String> {
    let level = family.level(k);
    (1..k).find_map(|j| {
        let lower = family.level(j);
        let slack = &lower.epsilon - &level.epsilon;
        let jj = Rational::from_integer(j as i64);
        level.functions.par_iter().find_map_any(|f| {
            let g = lower.function(f.p, f.q);
            let fam_k = level.grid.family(f.q);
            let fam_j = lower.grid.family(f.q);
            let mut xs: Vec<Rational> = f
                .breakpoints(fam_k)
                .into_iter()
                .chain(g.breakpoints(fam_j))
                .map(|(x, _)| x)
                .filter(|x| x.abs() <= jj)
                .chain([jj.clone(), -&jj])
                .collect();
            xs.sort();
            xs.dedup();
            xs.iter().find_map(|x| {
                let hi = f.eval(fam_k, x);
                let lo = g.eval(fam_j, x);
                (hi < lo || hi > &lo + &slack).then(|| {
                    format!("f_{k}^{}{}({x}) = {hi} vs f_{j} = {lo}, slack {slack}", f.p, f.q)
                })
            })
        })
    })
}
