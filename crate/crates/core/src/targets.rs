//! Built-in target functions and lattice sup-norm error measurement.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{KstError, Result};
use crate::exactnum::Rational;

pub type FloatEval = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type ExactEval = Arc<dyn Fn(&[Rational]) -> Rational + Send + Sync>;

#[derive(Clone)]
pub struct TargetFunction {
    pub name: String,
    pub m: usize,
    pub float: FloatEval,
    pub exact: Option<ExactEval>,
    /// Lipschitz constant with respect to the max norm.
    pub lipschitz: Option<f64>,
    /// `f = 0` outside `[-l-1, l+1]^m`.
    pub support: Option<usize>,
}

impl std::fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TargetFunction")
            .field("name", &self.name)
            .field("m", &self.m)
            .field("exact", &self.exact.is_some())
            .field("lipschitz", &self.lipschitz)
            .field("support", &self.support)
            .finish()
    }
}

pub const BUILTIN_NAMES: [&str; 7] = [
    "zero",
    "pyramid_bump",
    "product_xy_bump",
    "gaussian_bump",
    "linear_sum",
    "sin_sum",
    "maxnorm",
];

fn max_norm(x: &[Rational]) -> Rational {
    x.iter().map(Rational::abs).max().unwrap_or_else(Rational::zero)
}

fn max_norm_f64(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn tent(t: &Rational) -> Rational {
    (Rational::one() - t.abs()).max(Rational::zero())
}

pub fn builtin(name: &str, m: usize) -> Result<TargetFunction> {
    if m == 0 {
        return Err(KstError::Parameter("arity must be positive".into()));
    }
    let mf = m as f64;
    let t = |float: fn(&[f64]) -> f64, exact: Option<fn(&[Rational]) -> Rational>, lipschitz: f64, support: Option<usize>| {
        TargetFunction {
            name: name.to_string(),
            m,
            float: Arc::new(float),
            exact: exact.map(|e| Arc::new(e) as ExactEval),
            lipschitz: Some(lipschitz),
            support,
        }
    };
    Ok(match name {
        "zero" => t(|_| 0.0, Some(|_| Rational::zero()), 0.0, Some(0)),
        "pyramid_bump" => t(
            |x| (1.0 - max_norm_f64(x)).max(0.0),
            Some(|x| tent(&max_norm(x))),
            1.0,
            Some(1),
        ),
        "product_xy_bump" => t(
            |x| x.iter().map(|v| (1.0 - v.abs()).max(0.0)).product(),
            Some(|x| x.iter().fold(Rational::one(), |acc, v| acc * tent(v))),
            mf,
            Some(1),
        ),
        // exp(-2|x|^2) times a max-norm tent vanishing at |x|_inf = 2.
        "gaussian_bump" => t(
            |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (-2.0 * r2).exp() * (1.0 - max_norm_f64(x) / 2.0).max(0.0)
            },
            None,
            2.0 * mf + 0.5,
            Some(1),
        ),
        "linear_sum" => t(|x| x.iter().sum(), Some(|x| x.iter().cloned().sum()), mf, None),
        "sin_sum" => t(|x| x.iter().map(|v| v.sin()).sum(), None, mf, None),
        "maxnorm" => t(max_norm_f64, Some(max_norm), 1.0, None),
        other => return Err(KstError::UnknownFunction(other.to_string())),
    })
}

impl TargetFunction {
    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        (self.float)(x)
    }

    /// Exact when an exact evaluator exists, otherwise the exact value of
    /// the float result.
    pub fn eval(&self, x: &[Rational]) -> Rational {
        match &self.exact {
            Some(f) => f(x),
            None => {
                let xf: Vec<f64> = x.iter().map(Rational::to_f64).collect();
                Rational::from_f64((self.float)(&xf)).unwrap_or_else(Rational::zero)
            }
        }
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }
}

/// Regular grid on `[-half_width, half_width]^m` with `per_axis` points per
/// axis, corners included.
#[derive(Clone, Debug, Serialize)]
pub struct Lattice {
    pub m: usize,
    pub half_width: Rational,
    pub per_axis: usize,
}

impl Lattice {
    pub fn new(m: usize, half_width: Rational, per_axis: usize) -> Result<Self> {
        if per_axis < 2 || !half_width.is_positive() {
            return Err(KstError::Parameter("lattice needs >= 2 points per axis and a positive window".into()));
        }
        Ok(Lattice {
            m,
            half_width,
            per_axis,
        })
    }

    pub fn pitch(&self) -> Rational {
        &self.half_width * Rational::new(2, self.per_axis as i64 - 1)
    }

    pub fn axis(&self) -> Vec<Rational> {
        let pitch = self.pitch();
        (0..self.per_axis)
            .map(|i| -&self.half_width + &pitch * Rational::from_integer(i as i64))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.per_axis.pow(self.m as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Point number `n` in row-major order.
    pub fn point(&self, axis: &[Rational], mut n: usize) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); self.m];
        for slot in x.iter_mut().rev() {
            *slot = axis[n % self.per_axis].clone();
            n /= self.per_axis;
        }
        x
    }

    pub fn points(&self) -> Vec<Vec<Rational>> {
        let axis = self.axis();
        (0..self.len()).map(|n| self.point(&axis, n)).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SupError {
    pub max_abs_error: Rational,
    pub argmax: Vec<Rational>,
    pub pitch: Rational,
    /// Whether target values were computed exactly.
    pub exact_target: bool,
    /// Off-lattice bound, when the target declares a modulus.
    pub certificate: Option<Certificate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    /// `L_f * pitch / 2`: target variation to the nearest lattice point.
    pub target_term: f64,
    /// Same for the reconstruction, when its modulus is known.
    pub reconstruction_term: Option<f64>,
    /// Lattice max plus both terms; `None` without a reconstruction modulus.
    pub bound: Option<f64>,
}

/// Max over the lattice of `|f(x) - reconstruct(x)|`, first maximizer in
/// lattice order.
pub fn sup_error<R>(f: &TargetFunction, reconstruct: R, lattice: &Lattice, reconstruction_lipschitz: Option<f64>) -> SupError
where
    R: Fn(&[Rational]) -> Rational + Sync,
{
    let axis = lattice.axis();
    let (max_abs_error, index) = (0..lattice.len())
        .into_par_iter()
        .map(|n| {
            let x = lattice.point(&axis, n);
            ((f.eval(&x) - reconstruct(&x)).abs(), n)
        })
        .reduce(
            || (Rational::zero(), usize::MAX),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    let index = if index == usize::MAX { 0 } else { index };
    let pitch = lattice.pitch();
    let half = pitch.to_f64() / 2.0;
    let certificate = f.lipschitz.map(|l| {
        let target_term = l * half;
        let reconstruction_term = reconstruction_lipschitz.map(|r| r * half);
        Certificate {
            target_term,
            reconstruction_term,
            bound: reconstruction_term.map(|r| max_abs_error.to_f64() + target_term + r),
        }
    });
    SupError {
        max_abs_error,
        argmax: lattice.point(&axis, index),
        pitch,
        exact_target: f.is_exact(),
        certificate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn builtin_values() {
        let z = builtin("zero", 2).unwrap();
        assert!(z.eval(&[q(3, 1), q(-7, 2)]).is_zero());
        let p = builtin("pyramid_bump", 2).unwrap();
        assert_eq!(p.eval(&[q(0, 1), q(0, 1)]), Rational::one());
        assert_eq!(p.eval(&[q(1, 4), q(-1, 2)]), q(1, 2));
        assert_eq!(p.support, Some(1));
        assert_eq!(p.lipschitz, Some(1.0));
        let l = builtin("linear_sum", 2).unwrap();
        assert_eq!(l.eval(&[q(1, 3), q(1, 6)]), q(1, 2));
        assert_eq!(l.support, None);
        let b = builtin("product_xy_bump", 2).unwrap();
        assert_eq!(b.eval(&[q(1, 2), q(1, 2)]), q(1, 4));
        assert!(matches!(builtin("cosh", 2), Err(KstError::UnknownFunction(_))));
    }

    #[test]
    fn float_and_exact_agree() {
        for name in BUILTIN_NAMES {
            let f = builtin(name, 2).unwrap();
            for x in [[q(1, 3), q(-2, 5)], [q(7, 4), q(0, 1)], [q(-3, 1), q(5, 2)]] {
                let xf: Vec<f64> = x.iter().map(Rational::to_f64).collect();
                assert!((f.eval(&x).to_f64() - f.eval_f64(&xf)).abs() < 1e-12, "{name}");
                assert_eq!(f.eval_f64(&xf), f.eval_f64(&xf));
            }
        }
    }

    #[test]
    fn declared_support_holds_on_samples() {
        for name in BUILTIN_NAMES {
            let f = builtin(name, 2).unwrap();
            let Some(l) = f.support else { continue };
            let edge = l as f64 + 1.0;
            for i in 0..200 {
                let t = i as f64 / 10.0;
                assert_eq!(f.eval_f64(&[edge + t, 0.3 * t]), 0.0, "{name}");
                assert_eq!(f.eval_f64(&[-0.1 * t, -edge - t]), 0.0, "{name}");
            }
        }
    }

    #[test]
    fn lattice_shape() {
        let lat = Lattice::new(2, q(3, 1), 7).unwrap();
        assert_eq!(lat.pitch(), q(1, 1));
        let pts = lat.points();
        assert_eq!(pts.len(), 49);
        assert_eq!(pts[0], vec![q(-3, 1), q(-3, 1)]);
        assert_eq!(pts[48], vec![q(3, 1), q(3, 1)]);
        assert_eq!(pts[1], vec![q(-3, 1), q(-2, 1)]);
        assert!(Lattice::new(2, q(3, 1), 1).is_err());
    }

    #[test]
    fn sup_error_basics() {
        let f = builtin("pyramid_bump", 2).unwrap();
        let lat = Lattice::new(2, q(3, 1), 13).unwrap();
        let same = sup_error(&f, |x| f.eval(x), &lat, Some(1.0));
        assert!(same.max_abs_error.is_zero());
        let zero = sup_error(&f, |_| Rational::zero(), &lat, None);
        assert_eq!(zero.max_abs_error, Rational::one());
        assert_eq!(zero.argmax, vec![q(0, 1), q(0, 1)]);
        let cert = zero.certificate.unwrap();
        assert_eq!(cert.target_term, 0.25);
        assert!(cert.bound.is_none());
    }

    #[test]
    fn refinement_never_decreases_max() {
        let f = builtin("gaussian_bump", 2).unwrap();
        let g = |x: &[Rational]| x[0].clone() * Rational::new(1, 10);
        let mut prev = Rational::zero();
        // 5, 9, 17, 33 points: each lattice contains the previous one.
        for n in [5, 9, 17, 33] {
            let lat = Lattice::new(2, q(3, 1), n).unwrap();
            let e = sup_error(&f, g, &lat, None).max_abs_error;
            assert!(e >= prev);
            prev = e;
        }
    }
}
