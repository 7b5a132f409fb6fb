//! Outer functions for the pyramid bump in one variable, with the residual
//! trace and a lattice error check.
//!
//!     cargo run --release --example decompose_bump

use kst::decompose::{decompose_compact, reconstruct, DecomposeConfig, Stop};
use kst::inner::{BuildConfig, InnerFamily, Mode};
use kst::targets::{builtin, sup_error, Lattice};
use kst::Rational;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (family, _) = InnerFamily::build(&BuildConfig::new(1, 2, Mode::Faithful))?;
    let h = builtin("pyramid_bump", 1)?;
    let mut config = DecomposeConfig::new(1, Stop::Rounds(8));
    config.lattice_per_axis = 61;
    let d = decompose_compact(&family, &h, &config)?;

    for row in &d.trace {
        println!("r={} k={} M_r={:.6} osc={:.3e} certified={}", row.r, row.k, row.m_r.to_f64(), row.oscillation.to_f64(), row.oscillation_certified);
    }
    if !d.complete {
        println!("stopped after {} rounds: the family is only {} levels deep", d.rounds_executed(), family.depth());
    }
    for (q, g) in d.outer.iter().enumerate() {
        println!("g_{} has {} breakpoints, max |g| = {:.4}", q + 1, g.points.len(), g.max_abs().to_f64());
    }
    let lattice = Lattice::new(1, Rational::from_integer(3), 61)?;
    let err = sup_error(&h, |x| reconstruct(&d, &family, x), &lattice, None);
    println!("lattice sup error {:.6} at {:?} (trace says {:.6})", err.max_abs_error.to_f64(), err.argmax[0].to_f64(), d.m_final().to_f64());
    Ok(())
}
