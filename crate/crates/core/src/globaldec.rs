//! Targets without compact support: split `f = sum_n alpha_n f` over
//! max-norm shells, decompose each piece, and add the outer functions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::decompose::{decompose_compact, DecomposeConfig, Decomposition, Stop};
use crate::error::{KstError, Result};
use crate::exactnum::Rational;
use crate::inner::InnerFamily;
use crate::pwl::PiecewiseLinear;
use crate::targets::TargetFunction;

fn max_norm(x: &[Rational]) -> Rational {
    x.iter().map(Rational::abs).max().unwrap_or_else(Rational::zero)
}

/// Tent weight of shell `n` at max-norm `t`.
pub fn alpha_at_norm(n: usize, t: &Rational) -> Rational {
    let one = Rational::one();
    let nn = Rational::from_integer(n as i64);
    if n == 0 {
        if t <= &one {
            return one;
        }
        return (Rational::from_integer(2) - t).max(Rational::zero());
    }
    if t <= &nn || t >= &(&nn + Rational::from_integer(2)) {
        Rational::zero()
    } else if t <= &(&nn + &one) {
        t - &nn
    } else {
        &nn + Rational::from_integer(2) - t
    }
}

pub fn alpha(n: usize, x: &[Rational]) -> Rational {
    alpha_at_norm(n, &max_norm(x))
}

fn alpha_f64(n: usize, t: f64) -> f64 {
    let nf = n as f64;
    if n == 0 {
        return if t <= 1.0 { 1.0 } else { (2.0 - t).max(0.0) };
    }
    if t <= nf || t >= nf + 2.0 {
        0.0
    } else if t <= nf + 1.0 {
        t - nf
    } else {
        nf + 2.0 - t
    }
}

/// `alpha_i f`, supported in `[-i-2, i+2]^m`, so with support bound
/// `l_i = i + 1`.
pub fn shell_target(f: &TargetFunction, i: usize) -> TargetFunction {
    let float = {
        let g = Arc::clone(&f.float);
        Arc::new(move |x: &[f64]| alpha_f64(i, x.iter().fold(0.0, |a, v: &f64| a.max(v.abs()))) * g(x))
    };
    let exact = f.exact.as_ref().map(|e| {
        let e = Arc::clone(e);
        Arc::new(move |x: &[Rational]| {
            let w = alpha(i, x);
            if w.is_zero() {
                w
            } else {
                w * e(x)
            }
        }) as crate::targets::ExactEval
    });
    // |f| <= |f(0)| + L (i+2) on the shell, and alpha is 1-Lipschitz.
    let lipschitz = f.lipschitz.map(|l| {
        let f0 = f.eval_f64(&vec![0.0; f.m]).abs();
        l + f0 + l * (i as f64 + 2.0)
    });
    TargetFunction {
        name: format!("alpha_{i}*{}", f.name),
        m: f.m,
        float,
        exact,
        lipschitz,
        support: Some(i + 1),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shell {
    pub index: usize,
    pub decomposition: Decomposition,
    /// `g_q^i` after clipping to `[i-1, m(i+2)+1]`.
    pub clipped: Vec<PiecewiseLinear>,
    pub clip_window: (Rational, Rational),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalDecomposition {
    pub m: usize,
    pub target: String,
    pub shells: Vec<Shell>,
    /// `g_q = sum_i g_q^i`.
    pub outer: Vec<PiecewiseLinear>,
    pub phi_depth: usize,
    /// Valid for `|x|_inf <= window`.
    pub window: usize,
}

impl GlobalDecomposition {
    pub fn complete(&self) -> bool {
        self.shells.iter().all(|s| s.decomposition.complete)
    }
}

/// The image window `[i-1, m(i+2)+1]` of shell `i`.
pub fn clip_window(i: usize, m: usize) -> (Rational, Rational) {
    (
        Rational::from_integer(i as i64 - 1),
        Rational::from_integer((m * (i + 2) + 1) as i64),
    )
}

fn clip_to(g: &PiecewiseLinear, lo: &Rational, hi: &Rational) -> PiecewiseLinear {
    match g.support_hull() {
        None => PiecewiseLinear::zero(),
        Some((a, b)) if &a >= lo && &b <= hi => g.clone(),
        Some(_) => {
            let ramp = Rational::one().min((hi - lo) * Rational::new(1, 4));
            g.clip(lo, hi, &ramp)
        }
    }
}

pub fn decompose_global(family: &InnerFamily, f: &TargetFunction, shells: usize, stop: Stop, lattice_per_axis: usize) -> Result<GlobalDecomposition> {
    if shells == 0 {
        return Err(KstError::Parameter("need at least one shell".into()));
    }
    if f.m != family.m {
        return Err(KstError::Parameter(format!("target arity {} but family m = {}", f.m, family.m)));
    }
    let m = family.m;
    let mut out = Vec::with_capacity(shells);
    for i in 0..shells {
        let h = shell_target(f, i);
        let mut config = DecomposeConfig::new(i + 1, stop.clone());
        config.lattice_per_axis = lattice_per_axis;
        let decomposition = decompose_compact(family, &h, &config)?;
        let (lo, hi) = clip_window(i, m);
        let clipped = decomposition.outer.iter().map(|g| clip_to(g, &lo, &hi)).collect();
        out.push(Shell {
            index: i,
            decomposition,
            clipped,
            clip_window: (lo, hi),
        });
    }
    let outer = (0..family.families_count())
        .map(|q| PiecewiseLinear::sum(out.iter().map(|s| &s.clipped[q])))
        .collect();
    Ok(GlobalDecomposition {
        m,
        target: f.name.clone(),
        shells: out,
        outer,
        phi_depth: family.depth(),
        window: shells - 1,
    })
}

/// `sum_q g_q(phi^q(x))`.
pub fn reconstruct_global(gdec: &GlobalDecomposition, family: &InnerFamily, x: &[Rational]) -> Rational {
    gdec.outer
        .iter()
        .enumerate()
        .map(|(i, g)| g.eval(&family.phi_at_depth(i + 1, x, gdec.phi_depth)))
        .sum()
}

/// `sum_i sum_q g_q^i(phi^q(x))`, the other summation order.
pub fn reconstruct_by_shells(gdec: &GlobalDecomposition, family: &InnerFamily, x: &[Rational]) -> Rational {
    let phis: Vec<Rational> = (1..=family.families_count())
        .map(|q| family.phi_at_depth(q, x, gdec.phi_depth))
        .collect();
    gdec.shells
        .iter()
        .map(|s| s.clipped.iter().zip(&phis).map(|(g, t)| g.eval(t)).sum::<Rational>())
        .sum()
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use super::*;
    use crate::inner::{BuildConfig, Mode};
    use crate::targets::builtin;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn family() -> &'static InnerFamily {
        static CELL: OnceLock<InnerFamily> = OnceLock::new();
        CELL.get_or_init(|| InnerFamily::build(&BuildConfig::new(1, 2, Mode::Faithful)).unwrap().0)
    }

    fn linear() -> &'static GlobalDecomposition {
        static CELL: OnceLock<GlobalDecomposition> = OnceLock::new();
        CELL.get_or_init(|| {
            let f = builtin("linear_sum", 1).unwrap();
            decompose_global(family(), &f, 3, Stop::Rounds(2), 61).unwrap()
        })
    }

    #[test]
    fn alpha_examples() {
        let zero = [q(0, 1), q(0, 1)];
        assert_eq!(alpha(0, &zero), Rational::one());
        let x = [q(3, 2), q(-1, 2)];
        assert_eq!(alpha(0, &x), q(1, 2));
        assert_eq!(alpha(1, &x), q(1, 2));
        assert!((2..6).all(|n| alpha(n, &x).is_zero()));
        let y = [q(-7, 1), q(2, 1)];
        assert_eq!(alpha(6, &y), Rational::one());
        assert!(alpha(7, &y).is_zero());
        assert!(alpha(5, &y).is_zero());
    }

    #[test]
    fn partition_of_unity_sweep() {
        let mut seed = 7u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            q(((seed >> 33) % 8001) as i64 - 4000, 1000)
        };
        for _ in 0..10_000 {
            let x = [next(), next()];
            let weights: Vec<Rational> = (0..8).map(|n| alpha(n, &x)).collect();
            assert_eq!(weights.iter().cloned().sum::<Rational>(), Rational::one());
            assert!(weights.iter().filter(|w| !w.is_zero()).count() <= 2);
            assert!(weights.iter().all(|w| !w.is_negative() && w <= &Rational::one()));
            for n in 1..8 {
                let (a, b) = (&weights[n - 1], &weights[n]);
                if !a.is_zero() && !b.is_zero() {
                    assert_eq!(b, &(Rational::one() - a));
                }
            }
        }
    }

    #[test]
    fn shell_targets_vanish_outside() {
        let f = builtin("linear_sum", 2).unwrap();
        for i in 0..4 {
            let h = shell_target(&f, i);
            let edge = i as i64 + 2;
            for j in 0..50 {
                let x = [Rational::from_integer(edge) + q(j, 7), q(j - 25, 3)];
                assert!(h.eval(&x).is_zero());
                let xf: Vec<f64> = x.iter().map(Rational::to_f64).collect();
                assert_eq!(h.eval_f64(&xf), 0.0);
            }
            if i > 0 {
                assert!(h.eval(&[q(0, 1), q(i as i64, 1)]).is_zero());
            }
        }
    }

    #[test]
    fn zero_target() {
        let f = builtin("zero", 1).unwrap();
        let g = decompose_global(family(), &f, 2, Stop::Rounds(1), 21).unwrap();
        assert!(g.outer.iter().all(PiecewiseLinear::is_zero));
        assert!(reconstruct_global(&g, family(), &[q(1, 2)]).is_zero());
    }

    #[test]
    fn summation_orders_agree() {
        let g = linear();
        for i in -40..=40 {
            let x = [q(i, 20)];
            assert_eq!(reconstruct_global(g, family(), &x), reconstruct_by_shells(g, family(), &x));
        }
    }

    #[test]
    fn clipped_breakpoints_in_window_and_locally_finite() {
        let g = linear();
        for s in &g.shells {
            let (lo, hi) = &s.clip_window;
            for gq in &s.clipped {
                for (x, y) in &gq.points {
                    assert!(y.is_zero() || (x >= lo && x <= hi));
                }
            }
        }
        for i in -10..=60 {
            let t = q(i, 10);
            let n = g.shells.iter().filter(|s| s.clipped.iter().any(|c| !c.eval(&t).is_zero())).count();
            let bound = g.shells.iter().filter(|s| s.clip_window.0 <= t && t <= s.clip_window.1).count();
            assert!(n <= bound);
        }
    }

    #[test]
    fn shell_zero_gets_a_round_and_deeper_shells_run_out_of_depth() {
        let g = linear();
        assert_eq!(g.shells[0].decomposition.rounds_executed(), 1);
        assert!(g.shells[1..].iter().all(|s| s.decomposition.rounds_executed() == 0));
        assert!(!g.complete());
    }

    #[test]
    fn image_confinement() {
        // Depth 2 certifies psi on [-2, 2], which is K_0 for m = 1.
        let fam = family();
        for j in -40..=40 {
            let x = [q(j, 20)];
            for qq in 1..=3 {
                let (v, b) = fam.eval_phi(qq, &x, 2).unwrap();
                assert!(v >= Rational::from_integer(-1));
                assert!(&v + &b <= Rational::from_integer(3));
            }
        }
    }
}
