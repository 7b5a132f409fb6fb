//! Continuous piecewise-linear functions on `R` with exact breakpoints,
//! extended by their end values.

use serde::{Deserialize, Serialize};

use crate::exactnum::Rational;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    /// Strictly increasing abscissae with their values. Empty means `0`.
    pub points: Vec<(Rational, Rational)>,
}

impl PiecewiseLinear {
    pub fn zero() -> Self {
        PiecewiseLinear { points: Vec::new() }
    }

    /// `points` must have strictly increasing abscissae.
    pub fn new(points: Vec<(Rational, Rational)>) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0].0 < w[1].0));
        PiecewiseLinear { points }
    }

    pub fn is_zero(&self) -> bool {
        self.points.iter().all(|(_, y)| y.is_zero())
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        let pts = &self.points;
        let Some(first) = pts.first() else {
            return Rational::zero();
        };
        let i = pts.partition_point(|(x, _)| x <= t);
        if i == 0 {
            return first.1.clone();
        }
        if i == pts.len() {
            return pts[i - 1].1.clone();
        }
        let (x0, y0) = &pts[i - 1];
        let (x1, y1) = &pts[i];
        if x0 == t {
            return y0.clone();
        }
        y0 + (y1 - y0) * ((t - x0) / (x1 - x0))
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        let pts = &self.points;
        if pts.is_empty() {
            return 0.0;
        }
        let i = pts.partition_point(|(x, _)| x.to_f64() <= t);
        if i == 0 {
            return pts[0].1.to_f64();
        }
        if i == pts.len() {
            return pts[i - 1].1.to_f64();
        }
        let (x0, y0) = (pts[i - 1].0.to_f64(), pts[i - 1].1.to_f64());
        let (x1, y1) = (pts[i].0.to_f64(), pts[i].1.to_f64());
        if x1 <= x0 {
            return y0;
        }
        y0 + (y1 - y0) * ((t - x0) / (x1 - x0))
    }

    /// Pointwise sum, over the union of breakpoints.
    pub fn add(&self, other: &PiecewiseLinear) -> PiecewiseLinear {
        let mut xs: Vec<&Rational> = self.points.iter().chain(&other.points).map(|(x, _)| x).collect();
        xs.sort();
        xs.dedup();
        let points = xs
            .into_iter()
            .map(|x| (x.clone(), self.eval(x) + other.eval(x)))
            .collect();
        PiecewiseLinear { points }.simplified()
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a PiecewiseLinear>) -> PiecewiseLinear {
        items.into_iter().fold(PiecewiseLinear::zero(), |acc, g| acc.add(g))
    }

    /// Drops interior points that lie on the segment between their
    /// neighbors, and repeated end values.
    pub fn simplified(mut self) -> PiecewiseLinear {
        let pts = std::mem::take(&mut self.points);
        let mut out: Vec<(Rational, Rational)> = Vec::with_capacity(pts.len());
        for p in pts {
            while out.len() >= 2 {
                let (x0, y0) = &out[out.len() - 2];
                let (x1, y1) = &out[out.len() - 1];
                if (y1 - y0) * (&p.0 - x1) == (&p.1 - y1) * (x1 - x0) {
                    out.pop();
                } else {
                    break;
                }
            }
            out.push(p);
        }
        if out.len() == 2 && out[0].1 == out[1].1 {
            out.pop();
        }
        if out.iter().all(|(_, y)| y.is_zero()) {
            out.clear();
        }
        PiecewiseLinear { points: out }
    }

    /// Smallest closed interval outside which the function is 0, or `None`
    /// for the zero function. Only meaningful when both end values are 0.
    pub fn support_hull(&self) -> Option<(Rational, Rational)> {
        let first = self.points.iter().position(|(_, y)| !y.is_zero())?;
        let last = self.points.iter().rposition(|(_, y)| !y.is_zero())?;
        let lo = if first > 0 { &self.points[first - 1].0 } else { &self.points[first].0 };
        let hi = self.points.get(last + 1).map_or(&self.points[last].0, |p| &p.0);
        Some((lo.clone(), hi.clone()))
    }

    pub fn max_abs(&self) -> Rational {
        self.points.iter().map(|(_, y)| y.abs()).max().unwrap_or_else(Rational::zero)
    }

    pub fn max_slope(&self) -> Rational {
        self.points
            .windows(2)
            .map(|w| ((&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0)).abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// Multiplies by a continuous piecewise-linear weight that is 1 on
    /// `[lo + ramp, hi - ramp]` and 0 outside `(lo, hi)`. The product is
    /// piecewise quadratic on the ramps; each ramp is resampled at its ends
    /// and at every breakpoint inside it, so the result is exact at those
    /// points and zero outside `[lo, hi]`.
    pub fn clip(&self, lo: &Rational, hi: &Rational, ramp: &Rational) -> PiecewiseLinear {
        let a = lo + ramp;
        let b = hi - ramp;
        let weight = |x: &Rational| -> Rational {
            if x <= lo || x >= hi {
                Rational::zero()
            } else if x < &a {
                (x - lo) / ramp
            } else if x > &b {
                (hi - x) / ramp
            } else {
                Rational::one()
            }
        };
        let mut xs: Vec<Rational> = self
            .points
            .iter()
            .map(|(x, _)| x.clone())
            .filter(|x| x > lo && x < hi)
            .chain([lo.clone(), a.clone(), b.clone(), hi.clone()])
            .collect();
        xs.sort();
        xs.dedup();
        let points = xs.into_iter().map(|x| {
            let y = self.eval(&x) * weight(&x);
            (x, y)
        });
        PiecewiseLinear { points: points.collect() }.simplified()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn tent() -> PiecewiseLinear {
        PiecewiseLinear::new(vec![(q(-1, 1), q(0, 1)), (q(0, 1), q(1, 1)), (q(1, 1), q(0, 1))])
    }

    #[test]
    fn eval_and_extension() {
        let g = tent();
        assert_eq!(g.eval(&q(1, 2)), q(1, 2));
        assert_eq!(g.eval(&q(-1, 4)), q(3, 4));
        assert_eq!(g.eval(&q(5, 1)), q(0, 1));
        assert_eq!(g.eval(&q(0, 1)), q(1, 1));
        assert!((g.eval_f64(0.25) - 0.75).abs() < 1e-15);
        assert_eq!(PiecewiseLinear::zero().eval(&q(3, 1)), Rational::zero());
        assert_eq!(g.support_hull(), Some((q(-1, 1), q(1, 1))));
        assert_eq!(g.max_slope(), q(1, 1));
    }

    #[test]
    fn simplify_removes_collinear_points() {
        let g = PiecewiseLinear::new(vec![(q(0, 1), q(0, 1)), (q(1, 1), q(1, 1)), (q(2, 1), q(2, 1)), (q(3, 1), q(0, 1))]);
        let s = g.clone().simplified();
        assert_eq!(s.points.len(), 3);
        for i in 0..=12 {
            assert_eq!(s.eval(&q(i, 4)), g.eval(&q(i, 4)));
        }
    }

    #[test]
    fn sum_with_negation_is_zero() {
        let g = tent();
        let neg = PiecewiseLinear::new(g.points.iter().map(|(x, y)| (x.clone(), -y)).collect());
        assert!(g.add(&neg).points.is_empty());
    }

    #[test]
    fn clip_zeroes_outside() {
        let g = PiecewiseLinear::new(vec![(q(-5, 1), q(2, 1)), (q(5, 1), q(2, 1))]);
        let c = g.clip(&q(0, 1), &q(4, 1), &q(1, 1));
        assert_eq!(c.eval(&q(-1, 1)), Rational::zero());
        assert_eq!(c.eval(&q(1, 2)), q(1, 1));
        assert_eq!(c.eval(&q(2, 1)), q(2, 1));
        assert_eq!(c.eval(&q(9, 2)), Rational::zero());
        let (lo, hi) = c.support_hull().unwrap();
        assert!(lo >= q(0, 1) && hi <= q(4, 1));
    }

    proptest! {
        #[test]
        fn sum_is_pointwise(ys in proptest::collection::vec(-50i64..50, 6), zs in proptest::collection::vec(-50i64..50, 5), t in -200i64..200) {
            let a = PiecewiseLinear::new(ys.iter().enumerate().map(|(i, &y)| (q(i as i64, 1), q(y, 7))).collect());
            let b = PiecewiseLinear::new(zs.iter().enumerate().map(|(i, &y)| (q(2 * i as i64 - 3, 3), q(y, 5))).collect());
            let x = q(t, 29);
            prop_assert_eq!(a.add(&b).eval(&x), a.eval(&x) + b.eval(&x));
        }
    }
}
