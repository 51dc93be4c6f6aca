use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use finsler_core::classify::{self, Verdict};
use finsler_core::connection;
use finsler_core::geodesics::{self, IntegratorOptions};
use finsler_core::sampling::{DEFAULT_SAMPLES, DEFAULT_SEED};
use finsler_core::{corpus, metric, FinslerError, MetricSpec, Sampler};
use serde_json::{json, Value};

use crate::report::{array_json, envelope};
use crate::specfile::{self, SpecError};
use crate::trace;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Core(#[from] FinslerError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("self-test failed: {0}")]
    SelfTest(String),
}

impl CliError {
    /// 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Spec(_) | CliError::Io(_) => 2,
            CliError::Core(
                FinslerError::InvalidSpec(_)
                | FinslerError::DimensionMismatch { .. }
                | FinslerError::IndexOutOfRange { .. },
            ) => 2,
            CliError::Core(_) | CliError::SelfTest(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "finsler", version, about = "Geometry and classification of m-th root Finsler metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the jet, connection bundle or Douglas tensor at one point
    Eval(EvalArgs),
    /// Run the nondegeneracy sweep and all classification predicates
    Classify(ClassifyArgs),
    /// Integrate a geodesic and write its trace as CSV
    Geodesic(GeodesicArgs),
    /// Test whether two metrics are projectively related
    Projective(ProjectiveArgs),
    /// Recover a projectively related linear connection at a point
    Reduce(ReduceArgs),
    /// Build the product metric of a Riemannian metric and a parallel form
    Construct(ConstructArgs),
    /// Classify the bundled corpus and check the expected verdicts
    Selftest(SamplingArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SamplingArgs {
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = classify::DEFAULT_TOLERANCE)]
    pub tol: f64,
}

impl SamplingArgs {
    fn settings(&self) -> Value {
        json!({ "samples": self.samples, "seed": self.seed, "tol": self.tol })
    }

    fn sampler(&self, spec: &MetricSpec) -> Sampler {
        Sampler::for_spec(spec, self.samples, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalWhat {
    Jet,
    Connection,
    Douglas,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Base point, comma separated
    #[arg(long)]
    pub x: String,
    /// Direction, comma separated
    #[arg(long)]
    pub y: String,
    #[arg(long, value_enum, default_value_t = EvalWhat::Jet)]
    pub what: EvalWhat,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct GeodesicArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub x0: String,
    #[arg(long)]
    pub y0: String,
    #[arg(long)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
    #[arg(long, default_value_t = 101)]
    pub nodes: usize,
    /// Trace CSV destination
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectiveArgs {
    #[arg(long)]
    pub spec_a: PathBuf,
    #[arg(long)]
    pub spec_b: PathBuf,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Base point, comma separated
    #[arg(long)]
    pub at: String,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    /// Quadratic metric spec
    #[arg(long)]
    pub riemann: PathBuf,
    /// Coefficient tensor of the form multiplied in, same schema, order ≥ 1
    #[arg(long)]
    pub alpha: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

pub fn parse_vector(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::Input(format!("--{what}: {e} in {s:?}"))))
        .collect()
}

fn check_len(v: &[f64], spec: &MetricSpec, what: &str) -> Result<(), CliError> {
    if v.len() != spec.dimension() {
        return Err(CliError::Input(format!("--{what} has {} entries, spec dimension is {}", v.len(), spec.dimension())));
    }
    Ok(())
}

fn elapsed(start: Instant) -> u128 {
    start.elapsed().as_millis()
}

/// Runs one command; the returned JSON goes to stdout.
pub fn run(command: &Command) -> Result<Value, CliError> {
    let start = Instant::now();
    match command {
        Command::Eval(a) => eval(a, start),
        Command::Classify(a) => {
            let spec = specfile::parse_spec(&a.spec)?;
            let suite = classify::classify_all(&spec, &a.sampling.sampler(&spec), a.sampling.tol)?;
            Ok(envelope("classify", &[&spec], a.sampling.settings(), suite, elapsed(start)))
        }
        Command::Geodesic(a) => geodesic(a, start),
        Command::Projective(a) => {
            let sa = specfile::parse_spec(&a.spec_a)?;
            let sb = specfile::parse_spec(&a.spec_b)?;
            let sampler = a.sampling.sampler(&sa);
            let relation = classify::test_projective_relation(&sa, &sb, &sampler, a.sampling.tol)?;
            let rapcsak = classify::rapcsak_residual(&sa, &sb, &sampler, a.sampling.tol)?;
            let result = json!({ "knebelmann": relation.report, "p_values": relation.p_values, "rapcsak": rapcsak });
            Ok(envelope("projective", &[&sa, &sb], a.sampling.settings(), result, elapsed(start)))
        }
        Command::Reduce(a) => {
            let spec = specfile::parse_spec(&a.spec)?;
            let x = parse_vector(&a.at, "at")?;
            check_len(&x, &spec, "at")?;
            let rec = classify::solve_riemann_projective(&spec, &x, &a.sampling.sampler(&spec))?;
            if rec.rank_deficient {
                eprintln!("warning: design matrix rank {} below {} (unknowns minus gauge)", rec.rank, rec.unknowns - rec.gauge_dim);
            }
            Ok(envelope("reduce", &[&spec], a.sampling.settings(), rec, elapsed(start)))
        }
        Command::Construct(a) => {
            let gamma = specfile::parse_spec(&a.riemann)?;
            let alpha = specfile::parse_tensor(&a.alpha)?;
            let sampler = a.sampling.sampler(&gamma);
            let built = classify::construct_from_riemannian(&gamma, &alpha, &sampler, a.sampling.tol)?;
            specfile::write_spec(&built, &a.out)?;
            let relation = classify::test_projective_relation(&gamma, &built, &sampler, a.sampling.tol)?;
            let result = json!({ "out": a.out.display().to_string(), "order": built.order(), "projective_to_base": relation.report });
            Ok(envelope("construct", &[&gamma, &built], a.sampling.settings(), result, elapsed(start)))
        }
        Command::Selftest(a) => selftest(a, start),
    }
}

fn eval(a: &EvalArgs, start: Instant) -> Result<Value, CliError> {
    let spec = specfile::parse_spec(&a.spec)?;
    let x = parse_vector(&a.x, "x")?;
    let y = parse_vector(&a.y, "y")?;
    check_len(&x, &spec, "x")?;
    check_len(&y, &spec, "y")?;
    let result = match a.what {
        EvalWhat::Jet => {
            let jet = metric::metric_jet(&spec, &x, &y)?;
            let usual = metric::usual_metric(&jet).ok();
            json!({
                "T": jet.t,
                "F": jet.f,
                "T_i": array_json(&jet.t_i),
                "h": array_json(&jet.h),
                "h_inv": array_json(&jet.h_inv),
                "cond_h": jet.cond_h,
                "g": usual.as_ref().map(|u| array_json(&u.g)),
            })
        }
        EvalWhat::Connection => {
            let b = connection::connection_bundle(&spec, &x, &y)?;
            json!({
                "gamma_up_transvected": array_json(&b.gamma_up_transvected),
                "spray": array_json(&b.spray),
                "nonlinear": array_json(&b.nonlinear),
                "berwald": array_json(&b.berwald),
                "hv_curvature": array_json(&b.hv_curvature),
                "metrical_horizontal": array_json(&b.metrical_horizontal),
                "berwald_cov_h": array_json(&b.berwald_cov_h),
            })
        }
        EvalWhat::Douglas => {
            let (d, scale) = connection::douglas_tensor_scaled(&spec, &x, &y)?;
            json!({ "douglas": array_json(&d), "term_scale": scale })
        }
    };
    let settings = json!({ "x": x, "y": y, "what": format!("{:?}", a.what).to_lowercase() });
    Ok(envelope("eval", &[&spec], settings, result, elapsed(start)))
}

fn geodesic(a: &GeodesicArgs, start: Instant) -> Result<Value, CliError> {
    let spec = specfile::parse_spec(&a.spec)?;
    let x0 = parse_vector(&a.x0, "x0")?;
    let y0 = parse_vector(&a.y0, "y0")?;
    check_len(&x0, &spec, "x0")?;
    check_len(&y0, &spec, "y0")?;
    let opts = IntegratorOptions { rtol: a.rtol, atol: a.atol, nodes: a.nodes, ..Default::default() };
    let tr = geodesics::integrate_geodesic_with(&spec, &x0, &y0, a.t_end, opts)?;
    trace::emit_trace(&tr, &a.out)?;
    let diag = geodesics::trace_diagnostics(&tr);
    let result = json!({
        "trace": a.out.display().to_string(),
        "nodes": tr.samples.len(),
        "unit_speed": tr.unit_speed,
        "stats": tr.stats,
        "diagnostics": diag,
        "final": tr.samples.last(),
    });
    let settings = json!({ "x0": x0, "y0": y0, "t_end": a.t_end, "options": opts });
    Ok(envelope("geodesic", &[&spec], settings, result, elapsed(start)))
}

pub const PREDICATES: [&str; 5] = ["minkowski", "berwald", "landsberg", "douglas", "projectively_flat"];

/// Expected verdicts per bundled entry, in `PREDICATES` order; `None` is not asserted.
pub fn expected_verdicts(name: &str) -> [Option<Verdict>; 5] {
    use Verdict::{Fails as F, Holds as H};
    match name {
        "euclidean" | "berwald_moor" | "constructed_flat" => [Some(H); 5],
        "beltrami" => [Some(F), Some(H), Some(H), Some(H), Some(H)],
        "generic_quartic" => [Some(F); 5],
        "quartic_squared_riemannian" => [Some(F), Some(H), Some(H), Some(H), None],
        "constructed_product" => [Some(F), Some(H), Some(H), Some(H), None],
        _ => [None; 5],
    }
}

fn verdict_name(v: Option<Verdict>) -> Value {
    serde_json::to_value(v).expect("verdicts serialize")
}

fn selftest(a: &SamplingArgs, start: Instant) -> Result<Value, CliError> {
    let mut entries = Vec::new();
    let mut mismatches = Vec::new();
    for entry in corpus::bundled() {
        let suite = classify::classify_all(&entry.spec, &a.sampler(&entry.spec), a.tol)?;
        let expected = expected_verdicts(entry.name);
        let mut rows = serde_json::Map::new();
        for (p, want) in PREDICATES.iter().zip(expected) {
            let got = suite.verdict(p);
            let ok = want.is_none() || want == got;
            if !ok {
                mismatches.push(format!("{}/{p}: expected {want:?}, got {got:?}", entry.name));
            }
            rows.insert(p.to_string(), json!({ "got": verdict_name(got), "expected": verdict_name(want), "ok": ok }));
        }
        let flat = suite.predicates.iter().find(|r| r.predicate == "projectively_flat");
        let modes_agree = flat.is_some_and(|r| r.secondary.as_ref().is_some_and(|s| s.verdict == r.verdict));
        if !modes_agree {
            mismatches.push(format!("{}: sampled and exact flatness modes disagree", entry.name));
        }
        entries.push(json!({ "name": entry.name, "verdicts": rows, "flat_modes_agree": modes_agree }));
    }
    for (name, (gamma, alpha)) in
        [("constructed_flat", corpus::flat_construction_parts()), ("constructed_product", corpus::product_construction_parts())]
    {
        let built = corpus::product_metric(&gamma, &alpha)?;
        let rel = classify::test_projective_relation(&gamma, &built, &a.sampler(&gamma), a.tol)?;
        if rel.report.verdict != Verdict::Holds {
            mismatches.push(format!("{name}: not projectively related to its base metric"));
        }
        entries.push(json!({ "name": format!("{name}_vs_base"), "projective_relation": rel.report }));
    }
    let result = json!({ "entries": entries, "mismatches": mismatches, "passed": mismatches.is_empty() });
    let value = envelope("selftest", &[], a.settings(), result, elapsed(start));
    if mismatches.is_empty() {
        Ok(value)
    } else {
        eprint!("{}", crate::report::render(&value));
        Err(CliError::SelfTest(mismatches.join("; ")))
    }
}

/// Applies `FINSLER_THREADS` (0 or unset = rayon default).
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("FINSLER_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| CliError::Input(format!("FINSLER_THREADS={v:?} is not a count")))?;
    if n > 0 {
        // Fails only if a global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
