//! Save and reload an inner family; the content hash survives.

use kst::inner::{BuildConfig, InnerFamily, Mode};
use kst::io::{load_inner, save_inner, InnerFamilyDocument};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (family, _) = InnerFamily::build(&BuildConfig::new(2, 1, Mode::Faithful))?;
    let doc = InnerFamilyDocument::new(family)?;
    let path = std::env::temp_dir().join("kst-family.json");
    save_inner(&path, &doc)?;
    let back = load_inner(&path)?;
    println!("{} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    println!("hash {} -> {} equal={}", doc.hash, back.hash, back == doc);
    println!("eps_1 = {}", back.family.level(1).epsilon);
    Ok(())
}
