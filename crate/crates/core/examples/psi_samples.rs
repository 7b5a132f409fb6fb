//! Print psi^{pq} on a few points together with its certified bracket.
//!
//!     cargo run --release --example psi_samples -- 1 1

use kst::inner::{BuildConfig, InnerFamily, Mode};
use kst::Rational;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|s| s.parse()).collect::<Result<_, _>>()?;
    let p = args.first().copied().unwrap_or(1);
    let q = args.get(1).copied().unwrap_or(1);
    let (family, _) = InnerFamily::build(&BuildConfig::new(1, 2, Mode::Faithful))?;
    for i in -8..=8 {
        let x = Rational::new(i, 4);
        let (lo, eps) = family.eval_psi(p, q, &x, 2)?;
        let coarse = family.eval_f(p, q, 1, &x);
        println!(
            "x={:>5}  f_1={:.9}  f_2={:.9}  psi in [{:.9}, {:.9}]",
            x.to_string(),
            coarse.to_f64(),
            lo.to_f64(),
            lo.to_f64(),
            (lo + eps).to_f64()
        );
    }
    Ok(())
}
