//! Build an inner family and print the per-level report.
//!
//!     cargo run --release --example build_inner -- 1 2 faithful

use kst::inner::conditions::verify;
use kst::inner::{BuildConfig, InnerFamily, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let m: usize = args.first().map_or(Ok(2), |s| s.parse())?;
    let depth: usize = args.get(1).map_or(Ok(1), |s| s.parse())?;
    let mode: Mode = args.get(2).map_or(Ok(Mode::Faithful), |s| s.parse())?;

    let config = BuildConfig::new(m, depth, mode);
    let (family, reports) = match InnerFamily::build(&config) {
        Ok(built) => built,
        Err(e) => {
            eprintln!("build stopped: {e}");
            std::process::exit(1);
        }
    };
    for r in &reports {
        println!(
            "k={} gamma={:.3e} eps={:.3e} n_k={} intervals/family={:?} prime bits<={} ({:.2}s)",
            r.k, r.gamma_f64, r.epsilon_f64, r.n_k, r.intervals_per_family, r.prime_bits_max, r.seconds
        );
    }
    let failed: Vec<_> = verify(&family).into_iter().filter(|c| !c.passed).collect();
    println!("conditions: {}", if failed.is_empty() { "all hold" } else { "FAILED" });
    for c in failed {
        println!("  level {} condition {}: {}", c.level, c.condition, c.detail);
    }
    Ok(())
}
