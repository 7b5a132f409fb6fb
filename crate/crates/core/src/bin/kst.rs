use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use kst::cells::{assert_images_disjoint, cube};
use kst::decompose::{decompose_compact, reconstruct, DecomposeConfig, Stop};
use kst::globaldec::{decompose_global, reconstruct_global};
use kst::inner::conditions::verify_with;
use kst::inner::{BuildConfig, InnerFamily, Mode};
use kst::io::{
    load_decomposition, load_inner, save_decomposition, save_inner, write_trace_csv,
    DecompositionBody, DecompositionDocument, InnerFamilyDocument,
};
use kst::targets::{builtin, sup_error, Lattice};
use kst::{KstError, Rational};

#[derive(Parser)]
#[command(name = "kst", version, about = "Kolmogorov superposition on R^m: inner functions, outer functions, checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the inner-function tower and write it as JSON.
    BuildInner {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value = "faithful")]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        /// Intervals per grid family allowed before giving up.
        #[arg(long)]
        max_intervals: Option<u128>,
    },
    /// Check conditions (1)-(7) and image disjointness at every level.
    Verify {
        #[arg(long)]
        inner: PathBuf,
        /// Cells enumerated per (level, family) before a check is skipped.
        #[arg(long, default_value_t = 20_000_000)]
        max_cells: u128,
    },
    /// Outer functions for a compactly supported target.
    Decompose {
        #[arg(long)]
        inner: PathBuf,
        #[arg(long)]
        function: String,
        #[arg(long)]
        support: usize,
        #[arg(long, default_value_t = 8)]
        rounds: usize,
        #[arg(long, default_value_t = 101)]
        lattice: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Outer functions for a target without compact support, by shells.
    DecomposeGlobal {
        #[arg(long)]
        inner: PathBuf,
        #[arg(long)]
        function: String,
        #[arg(long, default_value_t = 5)]
        shells: usize,
        #[arg(long, default_value_t = 8)]
        rounds_per_shell: usize,
        #[arg(long, default_value_t = 61)]
        lattice: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lattice sup-error of a stored decomposition.
    Report {
        #[arg(long)]
        decomp: PathBuf,
        /// Defaults to the path recorded in the decomposition.
        #[arg(long)]
        inner: Option<PathBuf>,
        #[arg(long, default_value_t = 101)]
        lattice: usize,
        #[arg(long, default_value = "3")]
        window: String,
        /// Per-point CSV: coordinates, f, reconstruction, abs error.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a decomposition at one point.
    Eval {
        #[arg(long)]
        decomp: PathBuf,
        #[arg(long)]
        inner: Option<PathBuf>,
        /// Comma-separated coordinates, decimals or n/d.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Sample psi^{pq} on [-depth, depth] to CSV.
    PlotData {
        #[arg(long)]
        inner: PathBuf,
        /// `p,q`
        #[arg(long)]
        psi: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Verification,
    Run(KstError),
}

impl From<KstError> for Failure {
    fn from(e: KstError) -> Self {
        match e {
            KstError::Parameter(msg) | KstError::UnknownFunction(msg) => Failure::Usage(msg),
            other => Failure::Run(other),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// `"0.25"`, `"-3"` or `"1/3"`, exactly.
fn parse_number(s: &str) -> Result<Rational, Failure> {
    let s = s.trim();
    let bad = || Failure::Usage(format!("not a number: {s:?}"));
    if s.contains('/') {
        return s.parse().map_err(|_| bad());
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let value: Rational = format!("{}/1{}", if digits.is_empty() { "0" } else { &digits }, "0".repeat(frac.len()))
        .parse()
        .map_err(|_| bad())?;
    Ok(if neg { -value } else { value })
}

fn parse_point(s: &str) -> Result<Vec<Rational>, Failure> {
    s.split(',').map(parse_number).collect()
}

fn load_family_for(decomp: &DecompositionDocument, inner: Option<&Path>) -> Result<InnerFamilyDocument, Failure> {
    let path = match (inner, &decomp.inner_path) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => return Err(Failure::Usage("no --inner given and none recorded in the decomposition".into())),
    };
    let doc = load_inner(&path)?;
    decomp.check_inner(&doc)?;
    Ok(doc)
}

fn eval_body(body: &DecompositionBody, family: &InnerFamily, x: &[Rational]) -> Rational {
    match body {
        DecompositionBody::Compact(d) => reconstruct(d, family, x),
        DecompositionBody::Global(g) => reconstruct_global(g, family, x),
    }
}

fn print_json(value: &serde_json::Value) {
    use std::io::Write;
    // A closed pipe (e.g. `| head`) is not an error worth a panic.
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(value).expect("json"));
}

fn build_inner(m: usize, depth: usize, mode: Mode, out: &Path, max_intervals: Option<u128>) -> CmdResult {
    let mut config = BuildConfig::new(m, depth, mode);
    if let Some(n) = max_intervals {
        config.max_intervals_per_family = n;
    }
    let (family, reports) = InnerFamily::build(&config)?;
    let doc = InnerFamilyDocument::new(family)?;
    save_inner(out, &doc)?;
    print_json(&json!({ "out": out.display().to_string(), "hash": doc.hash, "levels": reports }));
    Ok(())
}

fn verify_cmd(inner: &Path, max_cells: u128) -> CmdResult {
    let doc = load_inner(inner)?;
    let family = &doc.family;
    let checks = verify_with(family, max_cells);
    let mut ok = checks.iter().all(|c| c.passed);
    let mut disjointness = Vec::new();
    for level in &family.levels {
        let bbox = cube(family.m, &Rational::from_integer(level.k as i64));
        for q in 1..=family.families_count() {
            match assert_images_disjoint(family, level.k, q, &bbox, max_cells) {
                Ok(report) => {
                    ok &= report.disjoint;
                    disjointness.push(serde_json::to_value(&report).map_err(KstError::from)?);
                }
                Err(e) => {
                    ok = false;
                    disjointness.push(json!({ "level": level.k, "q": q, "disjoint": null, "error": e.to_string() }));
                }
            }
        }
    }
    print_json(&json!({ "passed": ok, "conditions": checks, "disjointness": disjointness }));
    if ok {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

#[allow(clippy::too_many_arguments)]
fn decompose_cmd(
    inner: &Path,
    function: &str,
    support: usize,
    rounds: usize,
    lattice: usize,
    out: &Path,
    trace: Option<&Path>,
) -> CmdResult {
    let doc = load_inner(inner)?;
    let h = builtin(function, doc.family.m)?;
    let mut config = DecomposeConfig::new(support, Stop::Rounds(rounds));
    config.lattice_per_axis = lattice;
    let d = decompose_compact(&doc.family, &h, &config)?;
    if let Some(path) = trace {
        write_trace_csv(path, &d.trace)?;
    }
    let summary = json!({
        "rounds_executed": d.rounds_executed(),
        "complete": d.complete,
        "trace": d.trace.iter().map(|t| json!({
            "r": t.r, "k_r": t.k, "M_r": t.m_r.to_f64(), "M_r_exact": t.m_r.to_string(),
        })).collect::<Vec<_>>(),
    });
    let out_doc = DecompositionDocument::new(&doc, Some(inner.display().to_string()), DecompositionBody::Compact(d));
    save_decomposition(out, &out_doc)?;
    print_json(&summary);
    Ok(())
}

fn decompose_global_cmd(inner: &Path, function: &str, shells: usize, rounds: usize, lattice: usize, out: &Path) -> CmdResult {
    let doc = load_inner(inner)?;
    let f = builtin(function, doc.family.m)?;
    let g = decompose_global(&doc.family, &f, shells, Stop::Rounds(rounds), lattice)?;
    let summary = json!({
        "complete": g.complete(),
        "window": g.window,
        "shells": g.shells.iter().map(|s| json!({
            "index": s.index,
            "rounds_executed": s.decomposition.rounds_executed(),
            "complete": s.decomposition.complete,
            "M_final": s.decomposition.m_final().to_f64(),
        })).collect::<Vec<_>>(),
    });
    let out_doc = DecompositionDocument::new(&doc, Some(inner.display().to_string()), DecompositionBody::Global(g));
    save_decomposition(out, &out_doc)?;
    print_json(&summary);
    Ok(())
}

fn report_cmd(decomp: &Path, inner: Option<&Path>, lattice: usize, window: &str, out: Option<&Path>) -> CmdResult {
    let d = load_decomposition(decomp)?;
    let inner_doc = load_family_for(&d, inner)?;
    let family = &inner_doc.family;
    let f = builtin(d.body.target(), d.body.m()).map_err(|_| {
        Failure::Usage(format!("target {:?} is not a builtin; cannot re-evaluate it", d.body.target()))
    })?;
    let lat = Lattice::new(d.body.m(), parse_number(window)?, lattice)?;
    let err = sup_error(&f, |x| eval_body(&d.body, family, x), &lat, None);
    if let Some(path) = out {
        let mut w = csv::Writer::from_path(path).map_err(KstError::from)?;
        let mut header: Vec<String> = (1..=d.body.m()).map(|p| format!("x{p}")).collect();
        header.extend(["f", "reconstruction", "abs_error"].map(String::from));
        w.write_record(&header).map_err(KstError::from)?;
        for x in lat.points() {
            let fx = f.eval(&x);
            let rx = eval_body(&d.body, family, &x);
            let mut row: Vec<String> = x.iter().map(|v| v.to_f64().to_string()).collect();
            row.push(fx.to_f64().to_string());
            row.push(rx.to_f64().to_string());
            row.push((fx - rx).abs().to_f64().to_string());
            w.write_record(&row).map_err(KstError::from)?;
        }
        w.flush().map_err(KstError::from)?;
    }
    let trace_m = match &d.body {
        DecompositionBody::Compact(c) => Some(c.m_final().to_string()),
        DecompositionBody::Global(_) => None,
    };
    print_json(&json!({
        "target": d.body.target(),
        "max_abs_error": err.max_abs_error.to_f64(),
        "max_abs_error_exact": err.max_abs_error.to_string(),
        "argmax": err.argmax.iter().map(Rational::to_f64).collect::<Vec<_>>(),
        "pitch": err.pitch.to_string(),
        "exact_target": err.exact_target,
        "lattice_only": err.certificate.as_ref().is_none_or(|c| c.bound.is_none()),
        "certificate": err.certificate,
        "trace_M_final": trace_m,
    }));
    Ok(())
}

fn eval_cmd(decomp: &Path, inner: Option<&Path>, at: &str) -> CmdResult {
    let d = load_decomposition(decomp)?;
    let inner_doc = load_family_for(&d, inner)?;
    let x = parse_point(at)?;
    if x.len() != d.body.m() {
        return Err(Failure::Usage(format!("expected {} coordinates, got {}", d.body.m(), x.len())));
    }
    let v = eval_body(&d.body, &inner_doc.family, &x);
    let f = builtin(d.body.target(), d.body.m()).ok().map(|f| f.eval(&x));
    print_json(&json!({
        "x": x.iter().map(Rational::to_string).collect::<Vec<_>>(),
        "value": v.to_f64(),
        "value_exact": v.to_string(),
        "target": f.as_ref().map(Rational::to_f64),
    }));
    Ok(())
}

fn plot_data(inner: &Path, psi: &str, samples: usize, out: &Path) -> CmdResult {
    let doc = load_inner(inner)?;
    let family = &doc.family;
    let (p, q) = psi
        .split_once(',')
        .and_then(|(p, q)| Some((p.trim().parse::<usize>().ok()?, q.trim().parse::<usize>().ok()?)))
        .ok_or_else(|| Failure::Usage(format!("--psi wants p,q; got {psi:?}")))?;
    if p == 0 || p > family.m || q == 0 || q > family.families_count() {
        return Err(Failure::Usage(format!("p must be in 1..={}, q in 1..={}", family.m, family.families_count())));
    }
    if samples < 2 {
        return Err(Failure::Usage("need at least 2 samples".into()));
    }
    let depth = family.depth();
    let half = Rational::from_integer(depth as i64);
    let step = &half * Rational::new(2, samples as i64 - 1);
    let mut w = csv::Writer::from_path(out).map_err(KstError::from)?;
    w.write_record(["x", "value", "bound"]).map_err(KstError::from)?;
    for i in 0..samples {
        let x = -&half + &step * Rational::from_integer(i as i64);
        let (v, eps) = family.eval_psi(p, q, &x, depth)?;
        w.write_record([x.to_f64().to_string(), v.to_f64().to_string(), eps.to_f64().to_string()])
            .map_err(KstError::from)?;
    }
    w.flush().map_err(KstError::from)?;
    Ok(())
}

fn configure_threads() {
    if let Some(n) = std::env::var("KST_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::BuildInner { m, depth, mode, out, max_intervals } => build_inner(m, depth, mode, &out, max_intervals),
        Command::Verify { inner, max_cells } => verify_cmd(&inner, max_cells),
        Command::Decompose { inner, function, support, rounds, lattice, out, trace } => {
            decompose_cmd(&inner, &function, support, rounds, lattice, &out, trace.as_deref())
        }
        Command::DecomposeGlobal { inner, function, shells, rounds_per_shell, lattice, out } => {
            decompose_global_cmd(&inner, &function, shells, rounds_per_shell, lattice, &out)
        }
        Command::Report { decomp, inner, lattice, window, out } => {
            report_cmd(&decomp, inner.as_deref(), lattice, &window, out.as_deref())
        }
        Command::Eval { decomp, inner, at } => eval_cmd(&decomp, inner.as_deref(), &at),
        Command::PlotData { inner, psi, samples, out } => plot_data(&inner, &psi, samples, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    configure_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
