//! Sort the cell images of every family at every level and report the
//! smallest gap, then duplicate one plateau value and show the witness.
//!
//!     cargo run --release --example disjointness -- 2 1

use kst::cells::{assert_images_disjoint, cube};
use kst::inner::{BuildConfig, InnerFamily, Mode};
use kst::Rational;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|s| s.parse()).collect::<Result<_, _>>()?;
    let m = args.first().copied().unwrap_or(2);
    let depth = args.get(1).copied().unwrap_or(1);
    let (family, _) = InnerFamily::build(&BuildConfig::new(m, depth, Mode::Faithful))?;

    for level in &family.levels {
        let bbox = cube(m, &Rational::from_integer(level.k as i64));
        for q in 1..=family.families_count() {
            let r = assert_images_disjoint(&family, level.k, q, &bbox, u128::MAX)?;
            println!(
                "k={} q={} cells={} disjoint={} min gap={:.3e} (m*eps={:.3e})",
                r.level,
                q,
                r.cells,
                r.disjoint,
                r.min_gap.map_or(f64::NAN, |g| g.to_f64()),
                (level.epsilon.clone() * Rational::from_integer(m as i64)).to_f64()
            );
        }
    }

    let mut broken = family.clone();
    let dup = broken.level(1).function(1, 1).numerators[1].clone();
    broken.set_plateau_numerator(1, 1, 1, 2, dup);
    let r = assert_images_disjoint(&broken, 1, 1, &cube(m, &Rational::one()), u128::MAX)?;
    if let Some((a, b)) = r.witness {
        println!("mutated: cells {:?} and {:?} share images near {:.6}", a.cell.indices, b.cell.indices, a.low.to_f64());
    }
    Ok(())
}
