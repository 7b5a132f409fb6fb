//! Which families' cells contain a point, and where phi sends it.
//!
//!     cargo run --release --example locate_cells -- 0.3 -0.7

use kst::cells::{image_interval, locate_cells};
use kst::inner::{BuildConfig, InnerFamily, Mode};
use kst::Rational;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x: Vec<f64> = std::env::args().skip(1).map(|s| s.parse()).collect::<Result<_, _>>()?;
    let x = if x.is_empty() { vec![0.3, -0.7] } else { x };
    let m = x.len();
    let (family, _) = InnerFamily::build(&BuildConfig::new(m, 1, Mode::Faithful))?;
    let exact: Vec<Rational> = x.iter().map(|&v| Rational::from_f64(v).expect("finite")).collect();

    let found = locate_cells(&family, 1, &exact);
    println!("{} of {} families contain {x:?} (at least {} always do)", found.len(), family.families_count(), m + 1);
    for (q, cell) in found {
        let img = image_interval(&family, &cell);
        let (phi, bound) = family.eval_phi(q, &exact, 1)?;
        println!(
            "q={q} cell {:?}: image [{:.6}, {:.6}], phi={:.6} (+{:.1e})",
            cell.indices,
            img.low.to_f64(),
            img.high.to_f64(),
            phi.to_f64(),
            bound.to_f64()
        );
    }
    Ok(())
}
