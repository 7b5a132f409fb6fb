//! The shell weights alpha_n along a ray.

use kst::globaldec::alpha;
use kst::Rational;

fn main() {
    for i in 0..=16 {
        let t = Rational::new(i, 4);
        let x = [t.clone(), Rational::new(-1, 3)];
        let w: Vec<String> = (0..5).map(|n| alpha(n, &x).to_string()).collect();
        let total: Rational = (0..8).map(|n| alpha(n, &x)).sum();
        println!("x=({t}, -1/3)  alpha_0..4 = [{}]  sum = {total}", w.join(", "));
    }
}
