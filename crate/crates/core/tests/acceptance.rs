//! Acceptance criteria 1-9, one PASS/FAIL line each. Exits nonzero when any
//! criterion fails; the failures are not softened to make the run green.
//!
//!     cargo test --release --test acceptance

use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use kst::cells::{assert_images_disjoint, cube, locate_cells};
use kst::decompose::{decompose_compact, reconstruct, DecomposeConfig, Decomposition, Stop};
use kst::globaldec::{alpha, clip_window, decompose_global, reconstruct_global, GlobalDecomposition};
use kst::inner::conditions::{all_passed, verify};
use kst::inner::{BuildConfig, InnerFamily, Mode};
use kst::io::{
    load_decomposition_for, load_inner, save_decomposition, save_inner, DecompositionBody, DecompositionDocument,
    InnerFamilyDocument,
};
use kst::targets::{builtin, sup_error, Lattice};
use kst::{KstError, Rational};

const M: usize = 2;
const ROUNDS: usize = 8;

struct Outcome {
    passed: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome { passed: true, detail: detail.into() }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome { passed: false, detail: detail.into() }
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

/// Shared state: the depth-2 faithful attempt and the deepest family that
/// could actually be built at `m = 2`.
struct Context {
    depth2: Result<(InnerFamily, Duration), KstError>,
    deepest: InnerFamily,
}

impl Context {
    fn new() -> Self {
        let start = Instant::now();
        let depth2 = InnerFamily::build(&BuildConfig::new(M, 2, Mode::Faithful)).map(|(f, _)| (f, start.elapsed()));
        let deepest = match &depth2 {
            Ok((f, _)) => f.clone(),
            Err(_) => InnerFamily::build(&BuildConfig::new(M, 1, Mode::Faithful)).expect("level 1 at m = 2").0,
        };
        Context { depth2, deepest }
    }
}

fn criterion_1(ctx: &Context) -> Outcome {
    let (family, build_time) = match &ctx.depth2 {
        Ok(built) => built,
        Err(e) => return fail(format!("m=2 depth 2 faithful build did not complete: {e}")),
    };
    let start = Instant::now();
    let checks = verify(family);
    let total = *build_time + start.elapsed();
    if !all_passed(&checks) {
        let bad: Vec<String> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("level {} cond {}", c.level, c.condition))
            .collect();
        return fail(format!("conditions failed: {}", bad.join(", ")));
    }
    if total > Duration::from_secs(60) {
        return fail(format!("build + verify took {:.1}s (> 60s)", total.as_secs_f64()));
    }
    match InnerFamily::build(&BuildConfig::new(M, 3, Mode::Relaxed)) {
        Ok((f3, _)) if all_passed(&verify(&f3)) => {
            pass(format!("depth 2 faithful in {:.1}s; depth 3 relaxed verified", total.as_secs_f64()))
        }
        Ok(_) => fail("depth 3 relaxed built but failed verification"),
        Err(e) => fail(format!("depth 2 faithful ok; depth 3 relaxed did not build: {e}")),
    }
}

fn disjoint_all(family: &InnerFamily) -> Result<(), String> {
    for level in &family.levels {
        let bbox = cube(family.m, &Rational::from_integer(level.k as i64));
        for qq in 1..=family.families_count() {
            let report = assert_images_disjoint(family, level.k, qq, &bbox, u128::MAX).map_err(|e| e.to_string())?;
            if !report.disjoint {
                return Err(format!("level {} family {qq} has overlapping images", level.k));
            }
        }
    }
    Ok(())
}

fn criterion_2(ctx: &Context) -> Outcome {
    // Negative control on level 1: give cell index 2 the residue of index 1.
    let mut mutated = ctx.deepest.clone();
    let dup = mutated.level(1).function(1, 1).numerators[1].clone();
    mutated.set_plateau_numerator(1, 1, 1, 2, dup);
    let control = assert_images_disjoint(&mutated, 1, 1, &cube(M, &Rational::one()), u128::MAX)
        .map(|r| r.witness.is_some())
        .unwrap_or(false);
    if !control {
        return fail("mutated family was not detected");
    }
    let level1 = disjoint_all(&ctx.deepest);
    match (&ctx.depth2, level1) {
        (_, Err(e)) => fail(e),
        (Ok((f, _)), Ok(())) => match disjoint_all(f) {
            Ok(()) => pass(format!("levels 1..={} disjoint for all q; mutation witnessed", f.depth())),
            Err(e) => fail(e),
        },
        (Err(e), Ok(())) => fail(format!("level 1 disjoint and mutation witnessed, but level 2 is not built: {e}")),
    }
}

fn criterion_3(ctx: &Context) -> Outcome {
    let family = &ctx.deepest;
    let families = family.families_count();
    let mut rng = StdRng::seed_from_u64(0x6b73_7433);
    for k in 1..=family.depth() {
        let kk = k as i64;
        let denom = 1_000_003i64;
        for _ in 0..10_000 {
            let x: Vec<Rational> = (0..M).map(|_| q(rng.gen_range(-kk * denom..=kk * denom), denom)).collect();
            let n = locate_cells(family, k, &x).len();
            if n < M + 1 {
                return fail(format!("level {k}: {n} families at {x:?}"));
            }
        }
        let specials = [-kk, 0, kk].map(Rational::from_integer);
        for a in &specials {
            for b in &specials {
                let n = locate_cells(family, k, &[a.clone(), b.clone()]).len();
                if n != families {
                    return fail(format!("level {k}: {n} of {families} families at ({a}, {b})"));
                }
            }
        }
    }
    pass(format!("levels 1..={}: >= {} families at 10^4 points, all {families} at the 9 special points", family.depth(), M + 1))
}

fn pyramid(ctx: &Context) -> Result<Decomposition, KstError> {
    let family = match &ctx.depth2 {
        Ok((f, _)) => f,
        Err(_) => &ctx.deepest,
    };
    let h = builtin("pyramid_bump", M)?;
    decompose_compact(family, &h, &DecomposeConfig::new(1, Stop::Rounds(ROUNDS)))
}

/// `M_{r+1} <= (2m+1)/(2m+2) M_r + slack`, the slack covering the lattice
/// surrogate on both sides.
fn contraction_holds(d: &Decomposition) -> Result<(), String> {
    let ratio = q(2 * M as i64 + 1, 2 * M as i64 + 2);
    let slack = d.lattice_slack.clone().unwrap_or_else(Rational::zero) * Rational::from_integer(2);
    for w in d.trace.windows(2) {
        if w[1].m_r > &ratio * &w[0].m_r + &slack {
            return Err(format!("round {}: M = {} after {}", w[1].r, w[1].m_r.to_f64(), w[0].m_r.to_f64()));
        }
    }
    Ok(())
}

fn criterion_4(d: &Result<Decomposition, KstError>) -> Outcome {
    let d = match d {
        Ok(d) => d,
        Err(e) => return fail(format!("decomposition failed: {e}")),
    };
    if d.rounds_executed() < ROUNDS {
        return fail(format!(
            "only {} of {ROUNDS} rounds: the inner family has depth {}, round r needs level >= r + 1",
            d.rounds_executed(),
            d.phi_depth
        ));
    }
    if let Err(e) = contraction_holds(d) {
        return fail(e);
    }
    let final_ratio = d.m_final() / &d.trace[0].m_r;
    if final_ratio > q(3, 10) {
        return fail(format!("M_8/M_0 = {:.4} > 0.30", final_ratio.to_f64()));
    }
    pass(format!("M_8/M_0 = {:.4}", final_ratio.to_f64()))
}

fn criterion_5(ctx: &Context, d: &Result<Decomposition, KstError>) -> Outcome {
    let d = match d {
        Ok(d) => d,
        Err(e) => return fail(format!("decomposition failed: {e}")),
    };
    if d.rounds_executed() < ROUNDS {
        return fail(format!("no M_{ROUNDS}: {} rounds executed", d.rounds_executed()));
    }
    let family = match &ctx.depth2 {
        Ok((f, _)) => f,
        Err(_) => &ctx.deepest,
    };
    let h = builtin("pyramid_bump", M).expect("builtin");
    let lattice = Lattice::new(M, Rational::from_integer(3), d.lattice_per_axis).expect("lattice");
    let err = sup_error(&h, |x| reconstruct(d, family, x), &lattice, None);
    if &err.max_abs_error != d.m_final() {
        return fail(format!("lattice error {} but M_8 = {}", err.max_abs_error, d.m_final()));
    }
    match err.certificate {
        Some(c) => pass(format!("sup error = M_8 = {:.4e}; target term {:.3e}", err.max_abs_error.to_f64(), c.target_term)),
        None => fail("no off-lattice certificate"),
    }
}

fn criterion_6() -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    let denom = 999_983i64;
    for _ in 0..10_000 {
        let x: Vec<Rational> = (0..M).map(|_| q(rng.gen_range(-4 * denom..=4 * denom), denom)).collect();
        let weights: Vec<Rational> = (0..8).map(|n| alpha(n, &x)).collect();
        if weights.iter().cloned().sum::<Rational>() != Rational::one() {
            return fail(format!("weights do not sum to 1 at {x:?}"));
        }
        if weights.iter().filter(|w| !w.is_zero()).count() > 2 {
            return fail(format!("more than two shells at {x:?}"));
        }
    }
    pass("sum = 1 exactly, <= 2 nonzero terms, 10^4 points")
}

fn criterion_7(ctx: &Context) -> Outcome {
    let family = match &ctx.depth2 {
        Ok((f, _)) => f,
        Err(_) => &ctx.deepest,
    };
    let f = builtin("linear_sum", M).expect("builtin");
    let g: GlobalDecomposition = match decompose_global(family, &f, 5, Stop::Rounds(ROUNDS), 61) {
        Ok(g) => g,
        Err(e) => return fail(format!("global decomposition failed: {e}")),
    };
    for s in &g.shells {
        let (lo, hi) = clip_window(s.index, M);
        let outside = s.clipped.iter().flat_map(|c| &c.points).any(|(x, y)| !y.is_zero() && (x < &lo || x > &hi));
        if outside {
            return fail(format!("shell {} has a nonzero breakpoint outside [{lo}, {hi}]", s.index));
        }
    }
    let lattice = Lattice::new(M, Rational::from_integer(3), 61).expect("lattice");
    let err = sup_error(&f, |x| reconstruct_global(&g, family, x), &lattice, None);
    // Shells whose tent reaches into the window [-3, 3]^2.
    let bound: Rational = g.shells.iter().filter(|s| s.index < 3).map(|s| s.decomposition.m_final().clone()).sum();
    let short: Vec<String> = g
        .shells
        .iter()
        .filter(|s| s.decomposition.rounds_executed() < ROUNDS)
        .map(|s| format!("{}:{}", s.index, s.decomposition.rounds_executed()))
        .collect();
    if !short.is_empty() {
        return fail(format!(
            "shell rounds below {ROUNDS} (shell:rounds {}); window error {:.3} vs sum of M_R {:.3}",
            short.join(" "),
            err.max_abs_error.to_f64(),
            bound.to_f64()
        ));
    }
    for s in &g.shells {
        if let Err(e) = contraction_holds(&s.decomposition) {
            return fail(format!("shell {}: {e}", s.index));
        }
    }
    if err.max_abs_error > bound {
        return fail(format!("window error {} > sum of M_R {}", err.max_abs_error.to_f64(), bound.to_f64()));
    }
    pass(format!("window error {:.4} <= {:.4}", err.max_abs_error.to_f64(), bound.to_f64()))
}

fn criterion_8(ctx: &Context) -> Outcome {
    let run = || -> Result<bool, KstError> {
        let dir = tempfile::tempdir()?;
        let family = match &ctx.depth2 {
            Ok((f, _)) => f.clone(),
            Err(_) => ctx.deepest.clone(),
        };
        let doc = InnerFamilyDocument::new(family)?;
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        save_inner(&a, &doc)?;
        let loaded = load_inner(&a)?;
        save_inner(&b, &loaded)?;
        let same_family = std::fs::read(&a)? == std::fs::read(&b)? && loaded.hash == doc.hash;

        let h = builtin("pyramid_bump", M)?;
        let mut config = DecomposeConfig::new(1, Stop::Rounds(ROUNDS));
        config.lattice_per_axis = 21;
        let d = decompose_compact(&doc.family, &h, &config)?;
        let ddoc = DecompositionDocument::new(&doc, None, DecompositionBody::Compact(d));
        let (c, e) = (dir.path().join("c.json"), dir.path().join("e.json"));
        save_decomposition(&c, &ddoc)?;
        let dl = load_decomposition_for(&c, &loaded)?;
        save_decomposition(&e, &dl)?;
        Ok(same_family && std::fs::read(&c)? == std::fs::read(&e)?)
    };
    match run() {
        Ok(true) => pass("family and decomposition documents byte-identical after save-load-save"),
        Ok(false) => fail("documents differ after save-load-save"),
        Err(e) => fail(e.to_string()),
    }
}

fn criterion_9(d: &Result<Decomposition, KstError>) -> Outcome {
    let d = match d {
        Ok(d) => d,
        Err(e) => return fail(format!("decomposition failed: {e}")),
    };
    if d.rounds_executed() < ROUNDS {
        return fail(format!("{} of {ROUNDS} rounds exist to check", d.rounds_executed()));
    }
    let m1 = Rational::from_integer(M as i64 + 1);
    for (round, prev) in d.rounds.iter().zip(&d.trace) {
        let cap = &prev.m_r / &m1;
        for (i, chi) in round.chi.iter().enumerate() {
            if chi.max_abs() > cap {
                return fail(format!("round {} q {}: |chi| {} > {}", round.r, i + 1, chi.max_abs(), cap));
            }
        }
    }
    pass(format!("{} rounds, all q", d.rounds_executed()))
}

fn main() {
    let ctx = Context::new();
    let decomposition = pyramid(&ctx);
    let outcomes = [
        criterion_1(&ctx),
        criterion_2(&ctx),
        criterion_3(&ctx),
        criterion_4(&decomposition),
        criterion_5(&ctx, &decomposition),
        criterion_6(),
        criterion_7(&ctx),
        criterion_8(&ctx),
        criterion_9(&decomposition),
    ];
    for (i, o) in outcomes.iter().enumerate() {
        println!("criterion {}: {} - {}", i + 1, if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
