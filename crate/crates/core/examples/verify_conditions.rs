//! Every construction condition at every level, one line each.
//!
//!     cargo run --release --example verify_conditions -- 1 2 relaxed

use kst::inner::conditions::verify;
use kst::inner::{BuildConfig, InnerFamily, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let m: usize = args.first().map_or(Ok(1), |s| s.parse())?;
    let depth: usize = args.get(1).map_or(Ok(2), |s| s.parse())?;
    let mode: Mode = args.get(2).map_or(Ok(Mode::Faithful), |s| s.parse())?;
    let (family, _) = InnerFamily::build(&BuildConfig::new(m, depth, mode))?;
    for c in verify(&family) {
        if c.passed {
            println!("level {} condition {}: ok", c.level, c.condition);
        } else {
            println!("level {} condition {}: FAILED {}", c.level, c.condition, c.detail);
        }
    }
    Ok(())
}
