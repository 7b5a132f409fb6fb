//! x -> x, which has no compact support, split over shells.

use kst::decompose::Stop;
use kst::globaldec::{decompose_global, reconstruct_by_shells, reconstruct_global};
use kst::inner::{BuildConfig, InnerFamily, Mode};
use kst::targets::builtin;
use kst::Rational;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (family, _) = InnerFamily::build(&BuildConfig::new(1, 2, Mode::Faithful))?;
    let f = builtin("linear_sum", 1)?;
    let g = decompose_global(&family, &f, 3, Stop::Rounds(4), 41)?;
    for s in &g.shells {
        println!(
            "shell {}: rounds={} M={:.4} window=[{}, {}]",
            s.index,
            s.decomposition.rounds_executed(),
            s.decomposition.m_final().to_f64(),
            s.clip_window.0,
            s.clip_window.1
        );
    }
    for i in -4..=4 {
        let x = [Rational::new(i, 2)];
        let a = reconstruct_global(&g, &family, &x);
        assert_eq!(a, reconstruct_by_shells(&g, &family, &x));
        println!("x={:>4}  f={:>5.2}  reconstruction={:.4}", x[0].to_string(), x[0].to_f64(), a.to_f64());
    }
    Ok(())
}
