//! The `ciag` command-line harness: `run`, `compare` and `verify-theory`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::{load_libsvm, write_trace_csv, DatasetSpec, LibsvmOptions, RunConfig};
use crate::optimizers::{run, Method, Reference, RunOptions, RunResult, StopCriteria, StopReason, StepSizeSchedule};
use crate::oracle::FiniteSumProblem;
use crate::problems::{
    generate_synthetic_svm, make_logistic_problem, make_quadratic_problem, solve_reference, solve_reference_best_effort,
    LogisticProblemConfig, REFERENCE_TOL,
};
use crate::theory::{
    ciag_recurrence_constants, fg_rate, lemma2_check, recurrence_simulate, saturation_check, saturation_sides, stepsize_bound,
    theorem_step, RateConstants, Recurrence, DEFAULT_MARGIN,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_MAX_ITERS: i32 = 3;
pub const EXIT_ASSERTION: i32 = 4;
pub const EXIT_THEORY: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "ciag", version, about = "Curvature-aided incremental aggregated gradient experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one method and write its trace.
    Run(ConfigArgs),
    /// Run several methods on the same problem and summarise them.
    Compare(CompareArgs),
    /// Numerical checks of the convergence theory.
    VerifyTheory(VerifyArgs),
}

/// Flags mirroring the configuration keys; they override `--config`.
#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<String>,
    /// `synthetic:<d>:<m>[:<seed>]` or `libsvm:<path>`.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub rho: Option<String>,
    /// `const:<g>`, `const-frac:<c>`, `iag-frac:<c>`, `vanishing` or `adaptive`.
    #[arg(long)]
    pub step: Option<String>,
    #[arg(long)]
    pub batch: Option<String>,
    #[arg(long)]
    pub grad_tol: Option<String>,
    #[arg(long)]
    pub gap_tol: Option<String>,
    #[arg(long)]
    pub max_passes: Option<String>,
    #[arg(long)]
    pub trace_every: Option<String>,
    /// `warm` or `cold`.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub append_bias: bool,
    /// `sign`, `one-two` or `auto`.
    #[arg(long)]
    pub label_map: Option<String>,
    /// Leave wall_time_s empty so traces are byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
    /// Skip the reference Newton solve (no objective gaps).
    #[arg(long)]
    pub no_reference: bool,
    /// Any other key, e.g. `--set step.iag=iag-frac:50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Comma-separated methods.
    #[arg(long)]
    pub methods: Option<String>,
    /// Ordering of passes-to-tolerance, e.g. `ciag<iag`. Repeatable.
    #[arg(long = "assert", value_name = "EXPR")]
    pub asserts: Vec<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Randomised recurrences to check.
    #[arg(long, default_value_t = 200)]
    pub recurrences: usize,
    /// Multiply every recurrence coefficient q_j by this factor.
    #[arg(long, default_value_t = 1.0)]
    pub inflate_q: f64,
}

impl ConfigArgs {
    pub fn to_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let pairs: [(&str, &Option<String>); 13] = [
            ("method", &self.method),
            ("dataset", &self.dataset),
            ("rho", &self.rho),
            ("step", &self.step),
            ("batch", &self.batch),
            ("grad_tol", &self.grad_tol),
            ("gap_tol", &self.gap_tol),
            ("max_passes", &self.max_passes),
            ("trace_every", &self.trace_every),
            ("init", &self.init),
            ("seed", &self.seed),
            ("out", &self.out),
            ("label_map", &self.label_map),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.apply(key, v)?;
            }
        }
        if self.append_bias {
            cfg.append_bias = true;
        }
        if self.no_timing {
            cfg.timing = false;
        }
        if self.no_reference {
            cfg.reference = false;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::config(kv, "expected KEY=VALUE"))?;
            cfg.apply(k, v)?;
        }
        Ok(cfg)
    }
}

/// Builds the logistic problem described by `cfg`.
pub fn build_problem(cfg: &RunConfig) -> Result<FiniteSumProblem> {
    let spec = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::config("dataset", "no dataset given"))?;
    let dataset = match spec {
        DatasetSpec::Synthetic { d, m, seed } => generate_synthetic_svm(*d, *m, seed.unwrap_or(cfg.seed))?.dataset,
        DatasetSpec::Libsvm(path) => load_libsvm(
            path,
            &LibsvmOptions {
                expected_dim: None,
                label_map: cfg.label_map,
                append_bias: cfg.append_bias,
            },
        )?,
    };
    let rho = cfg.rho.unwrap_or(1.0 / dataset.len() as f64);
    make_logistic_problem(&LogisticProblemConfig { rho, dataset })
}

/// Reference minimizer from `θ = 0` by damped Newton. Problems whose rounding
/// floor lies above the tolerance fall back to the best iterate found.
pub fn compute_reference(problem: &FiniteSumProblem) -> Result<Reference> {
    let sol = solve_reference_best_effort(problem, &DVector::zeros(problem.dim()), REFERENCE_TOL)?;
    Ok(Reference {
        theta: sol.theta,
        objective: sol.objective,
    })
}

/// Runs one configured method on a prepared problem.
pub fn execute(cfg: &RunConfig, method: Method, problem: &FiniteSumProblem, reference: Option<&Reference>) -> Result<RunResult> {
    let m = problem.num_components();
    let selection = cfg.selection();
    let schedule = cfg.step_for(method).schedule(problem, selection);
    let options = RunOptions {
        schedule,
        selection,
        init: cfg.init,
        stop: StopCriteria {
            grad_tol: cfg.grad_tol,
            gap_tol: cfg.gap_tol,
            max_accesses: cfg.max_accesses(m),
        },
        trace_every: cfg.trace_every_for(method, m),
        reference: reference.cloned(),
        record_wall_time: cfg.timing,
        ..RunOptions::new(schedule, m)
    };
    run(problem, method, &options, &cfg.initial_point(problem.dim()))
}

pub fn exit_code(reason: StopReason) -> i32 {
    match reason {
        StopReason::GradTol | StopReason::GapTol => EXIT_OK,
        StopReason::Diverged => EXIT_DIVERGED,
        StopReason::MaxIters => EXIT_MAX_ITERS,
    }
}

fn summary_line(r: &RunResult, grad_tol: f64) -> String {
    let last = r.last();
    let passes = r
        .passes_to_grad_tol(grad_tol)
        .map(|p| format!("{p:.1} passes"))
        .unwrap_or_else(|| format!("not reached after {:.1} passes", last.effective_passes));
    let time = last.wall_time_s.map(|t| format!(", {t:.3} s")).unwrap_or_default();
    format!("{}: {} ({}), |grad F| = {:e}{}", r.method, r.stop_reason, passes, last.grad_norm, time)
}

/// `run`: solve, write the trace, print a one-line summary.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunResult> {
    let problem = build_problem(cfg)?;
    let reference = if cfg.reference { Some(compute_reference(&problem)?) } else { None };
    let result = execute(cfg, cfg.method, &problem, reference.as_ref())?;
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}_trace.csv", cfg.method)));
    write_trace_csv(&result.trace, &out)?;
    println!("{}", summary_line(&result, cfg.grad_tol));
    Ok(result)
}

/// One row of the comparison summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    /// Passes at the first traced row with `‖∇F‖ ≤ grad_tol`.
    pub passes_to_tol: Option<f64>,
    pub wall_s: Option<f64>,
    pub final_grad_norm: f64,
    pub stop_reason: StopReason,
}

impl SummaryRow {
    pub fn from_result(r: &RunResult, grad_tol: f64) -> Self {
        let last = r.last();
        Self {
            method: r.method,
            passes_to_tol: r.passes_to_grad_tol(grad_tol),
            wall_s: last.wall_time_s,
            final_grad_norm: last.grad_norm,
            stop_reason: r.stop_reason,
        }
    }

    fn passes_text(&self) -> String {
        self.passes_to_tol.map(|p| format!("{p:.1}")).unwrap_or_default()
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("method,passes_to_tol,wall_s,final_grad_norm,stop_reason\n");
    for r in rows {
        let wall = r.wall_s.map(|t| format!("{t:e}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{:e},{}", r.method, r.passes_text(), wall, r.final_grad_norm, r.stop_reason);
    }
    out
}

pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut out = format!("{:<12} {:>10} {:>10} {:>14} {}\n", "method", "passes", "wall_s", "grad_norm", "stop");
    for r in rows {
        let passes = r.passes_to_tol.map(|p| format!("{p:.1}")).unwrap_or_else(|| "-".into());
        let wall = r.wall_s.map(|t| format!("{t:.3}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "{:<12} {:>10} {:>10} {:>14.3e} {}", r.method, passes, wall, r.final_grad_norm, r.stop_reason);
    }
    out
}

/// A `left<right` or `left<=right` comparison of passes-to-tolerance.
/// Methods that never reach the tolerance count as infinitely many passes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assertion {
    pub left: Method,
    pub right: Method,
    pub strict: bool,
}

impl std::str::FromStr for Assertion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (l, r, strict) = if let Some((l, r)) = s.split_once("<=") {
            (l, r, false)
        } else if let Some((l, r)) = s.split_once('<') {
            (l, r, true)
        } else {
            return Err(Error::config("assert", format!("expected `a<b` or `a<=b`, got `{s}`")));
        };
        let method = |v: &str| v.parse::<Method>().map_err(|e| Error::config("assert", e.to_string()));
        Ok(Self {
            left: method(l)?,
            right: method(r)?,
            strict,
        })
    }
}

impl Assertion {
    pub fn holds(&self, rows: &[SummaryRow]) -> bool {
        let passes = |m: Method| {
            rows.iter()
                .find(|r| r.method == m)
                .map(|r| r.passes_to_tol.unwrap_or(f64::INFINITY))
        };
        match (passes(self.left), passes(self.right)) {
            (Some(a), Some(b)) if self.strict => a < b,
            (Some(a), Some(b)) => a <= b || (a.is_infinite() && b.is_infinite()),
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub results: Vec<RunResult>,
    pub rows: Vec<SummaryRow>,
    pub failed_assertions: Vec<String>,
}

/// `compare`: every method from `θ¹ = 0` on one problem, run in parallel.
/// Writes `<out>/<idx>_<method>.csv`, `summary.csv` and `summary.txt`.
pub fn cmd_compare(cfg: &RunConfig, asserts: &[String]) -> Result<Comparison> {
    let assertions: Vec<Assertion> = asserts.iter().map(|a| a.parse()).collect::<Result<_>>()?;
    let methods = if cfg.methods.is_empty() {
        vec![Method::Ciag, Method::Iag, Method::Ig]
    } else {
        cfg.methods.clone()
    };
    let problem = build_problem(cfg)?;
    let reference = if cfg.reference { Some(compute_reference(&problem)?) } else { None };
    let results: Vec<Result<RunResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = methods
            .iter()
            .map(|&method| {
                let (problem, reference) = (&problem, reference.as_ref());
                scope.spawn(move || execute(cfg, method, problem, reference))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });
    let results: Vec<RunResult> = results.into_iter().collect::<Result<_>>()?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    for (idx, r) in results.iter().enumerate() {
        write_trace_csv(&r.trace, out.join(format!("{idx}_{}.csv", r.method)))?;
    }
    let rows: Vec<SummaryRow> = results.iter().map(|r| SummaryRow::from_result(r, cfg.grad_tol)).collect();
    write_text(&out.join("summary.csv"), &summary_csv(&rows))?;
    let table = summary_table(&rows);
    write_text(&out.join("summary.txt"), &table)?;
    print!("{table}");
    let failed_assertions: Vec<String> = asserts
        .iter()
        .zip(&assertions)
        .filter(|(_, a)| !a.holds(&rows))
        .map(|(s, _)| s.clone())
        .collect();
    for f in &failed_assertions {
        eprintln!("assertion failed: {f}");
    }
    Ok(Comparison {
        results,
        rows,
        failed_assertions,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Outcome of one `verify-theory` check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// A random recurrence that satisfies the contraction condition for the
/// returned `δ`, with `J ≤ 4`, `η_j ∈ (1, 4]` and `M ≤ 50`.
pub fn random_recurrence(rng: &mut impl Rng) -> (Recurrence, f64) {
    let j = rng.random_range(1..=4);
    let p: f64 = rng.random_range(0.0..0.95);
    let delta = p + (1.0 - p) * rng.random_range(0.1..0.9);
    let r0: f64 = 10f64.powf(rng.random_range(-2.0..1.0));
    let eta: Vec<f64> = (0..j).map(|_| rng.random_range(1.05..=4.0)).collect();
    let weights: Vec<f64> = (0..j).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    // Spend between half and all of the slack δ − p.
    let budget = (delta - p) * rng.random_range(0.5..=1.0);
    let q = weights
        .iter()
        .zip(&eta)
        .map(|(w, e)| budget * w / total / r0.powf(e - 1.0))
        .collect();
    let window = rng.random_range(1..=50);
    (Recurrence::new(p, q, eta, window, r0).expect("generated constants are valid"), delta)
}

fn small_logistic(seed: u64) -> Result<FiniteSumProblem> {
    let ds = generate_synthetic_svm(10, 50, seed)?.dataset;
    make_logistic_problem(&LogisticProblemConfig::with_default_rho(ds))
}

/// Runs the theory checks.
pub fn verify_theory(seed: u64, recurrences: usize, inflate_q: f64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let c = RateConstants {
        mu: 1.0,
        lipschitz: 2.0,
        hessian_lipschitz: 1.0,
        k: 10,
        v_s: 1.0,
        epsilon: 0.0,
    };
    let expect = ((1.0_f64 / 30.0).sqrt() / 20.0).min((1.0_f64 / 32_640_000.0).powf(0.2));
    let got = stepsize_bound(&c)?;
    checks.push(Check::new(
        "stepsize_bound spot value",
        (got - expect).abs() <= 1e-15,
        format!("{got:e} vs {expect:e}"),
    ));

    let r1 = fg_rate(0.1, 1.0, 9.0).value;
    let r2 = fg_rate(0.2, 1.0, 9.0).value;
    checks.push(Check::new(
        "fg_rate spot values",
        (r1 - 0.82).abs() < 1e-15 && (r2 - (1.0 - 36.0 / 100.0)).abs() < 1e-15,
        format!("{r1}, {r2}"),
    ));

    let hand = recurrence_simulate(&Recurrence::new(0.5, vec![0.25 * inflate_q], vec![2.0], 1, 1.0)?, 2)?;
    checks.push(Check::new(
        "hand recurrence",
        (hand.value(1) - 0.75).abs() < 1e-12 && (hand.value(2) - 0.515625).abs() < 1e-12,
        format!("R1 = {}, R2 = {}", hand.value(1), hand.value(2)),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for n in 0..recurrences {
        let (mut r, delta) = random_recurrence(&mut rng);
        r.q.iter_mut().for_each(|q| *q *= inflate_q);
        let report = lemma2_check(&r, delta)?;
        if !report.passed() {
            failures.push(format!("#{n}: {:?}", report.verdict));
        }
    }
    checks.push(Check::new(
        "lemma2_check on randomized recurrences",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{recurrences} passed")
        } else {
            format!("{} failed, first {}", failures.len(), failures[0])
        },
    ));

    let mut consistency = Vec::new();
    for (lh, v, k) in [(1.0, 1.0, 10), (0.2, 4.0, 50), (5.0, 0.01, 3)] {
        let c = RateConstants {
            hessian_lipschitz: lh,
            v_s: v,
            k,
            ..c
        };
        let step = theorem_step(&c, DEFAULT_MARGIN)?;
        let mut r = ciag_recurrence_constants(&c, step.gamma)?;
        r.q.iter_mut().for_each(|q| *q *= inflate_q);
        let ok = step.delta < 1.0 && lemma2_check(&r, step.delta.max(r.p))?.passed();
        consistency.push(ok);
    }
    checks.push(Check::new(
        "recurrence constants at the theorem step",
        consistency.iter().all(|v| *v),
        format!("{consistency:?}"),
    ));

    let (k, q, q_h) = (20, 50.0, 0.5);
    let f = |v: f64| {
        let (l, r) = saturation_sides(v, k, q, q_h);
        l - r
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let flips = saturation_check(root * (1.0 - 1e-9), k, q, q_h) && !saturation_check(root * (1.0 + 1e-9), k, q, q_h);
    checks.push(Check::new("saturation_check boundary", flips, format!("root {root:e}")));

    checks.push(trajectory_check(seed)?);
    checks.push(quadratic_check(seed)?);
    Ok(checks)
}

/// Linear envelope and surrogate-error bound along a CIAG run at the
/// theorem's step size.
fn trajectory_check(seed: u64) -> Result<Check> {
    let problem = small_logistic(seed)?;
    let m = problem.num_components();
    let theta1 = DVector::zeros(problem.dim());
    let star = solve_reference(&problem, &theta1, REFERENCE_TOL)?;
    let v1 = (&theta1 - &star.theta).norm_squared();
    let c = RateConstants {
        mu: problem.mu(),
        lipschitz: problem.lipschitz(),
        hessian_lipschitz: problem.hessian_lipschitz(),
        k: m,
        v_s: v1,
        epsilon: 0.0,
    };
    let step = theorem_step(&c, DEFAULT_MARGIN)?;
    let mut options = RunOptions::new(StepSizeSchedule::Constant(step.gamma), m);
    options.trace_every = 1;
    options.stop.max_accesses = 20 * m;
    options.reference = Some(Reference {
        theta: star.theta,
        objective: star.objective,
    });
    options.record_wall_time = false;
    let r = run(&problem, Method::Ciag, &options, &theta1)?;
    let window = 2 * m + 1;
    let mut worst_envelope = 0.0_f64;
    let mut worst_bound = f64::NEG_INFINITY;
    for t in &r.trace {
        let bound = step.delta.powi(t.k.div_ceil(window) as i32) * v1;
        worst_envelope = worst_envelope.max(t.dist_sq.unwrap_or(0.0) / bound);
        worst_bound = worst_bound.max(t.surrogate_error.unwrap_or(0.0) - t.error_bound.unwrap_or(0.0));
    }
    Ok(Check::new(
        "CIAG envelope and surrogate-error bound",
        worst_envelope <= 1.0 && worst_bound <= 1e-12,
        format!("max V/envelope = {worst_envelope:.3e}, max error - bound = {worst_bound:e}"),
    ))
}

fn quadratic_check(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<DVector<f64>> = (0..30)
        .map(|_| DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let weights: Vec<f64> = (0..30).map(|_| rng.random_range(0.5..2.0)).collect();
    let problem = make_quadratic_problem(&centers, &weights)?;
    let mut options = RunOptions::new(StepSizeSchedule::Constant(1.0 / problem.lipschitz()), 30);
    options.trace_every = 1;
    options.stop.max_accesses = 30 * 30;
    options.record_wall_time = false;
    let r = run(&problem, Method::Ciag, &options, &DVector::zeros(8))?;
    let worst = r
        .trace
        .iter()
        .map(|t| t.surrogate_error.unwrap_or(0.0) / (1.0 + t.grad_norm))
        .fold(0.0, f64::max);
    Ok(Check::new(
        "quadratic surrogate exactness",
        worst <= 1e-9,
        format!("max relative surrogate error {worst:e}"),
    ))
}

fn run_main(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.to_config()?;
            let result = cmd_run(&cfg)?;
            Ok(exit_code(result.stop_reason))
        }
        Command::Compare(args) => {
            let mut cfg = args.config.to_config()?;
            if let Some(m) = &args.methods {
                cfg.apply("methods", m)?;
            }
            let cmp = cmd_compare(&cfg, &args.asserts)?;
            Ok(if cmp.failed_assertions.is_empty() { EXIT_OK } else { EXIT_ASSERTION })
        }
        Command::VerifyTheory(args) => {
            let checks = verify_theory(args.seed, args.recurrences, args.inflate_q)?;
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if failed.is_empty() {
                Ok(EXIT_OK)
            } else {
                eprintln!("failed checks: {}", failed.join(", "));
                Ok(EXIT_THEORY)
            }
        }
    }
}

/// Parses `args` and runs the selected command, returning the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match run_main(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assertions_parse_and_evaluate() {
        let a: Assertion = "ciag<iag".parse().unwrap();
        assert!(a.strict);
        let rows = vec![
            SummaryRow {
                method: Method::Ciag,
                passes_to_tol: Some(20.0),
                wall_s: None,
                final_grad_norm: 1e-11,
                stop_reason: StopReason::GradTol,
            },
            SummaryRow {
                method: Method::Iag,
                passes_to_tol: None,
                wall_s: None,
                final_grad_norm: 1e-6,
                stop_reason: StopReason::MaxIters,
            },
        ];
        assert!(a.holds(&rows));
        assert!(!"iag<ciag".parse::<Assertion>().unwrap().holds(&rows));
        assert!(!"ciag<ig".parse::<Assertion>().unwrap().holds(&rows));
        assert!("ciag>iag".parse::<Assertion>().is_err());
    }

    #[test]
    fn summary_rounds_passes() {
        let rows = vec![SummaryRow {
            method: Method::Ciag,
            passes_to_tol: Some(23.45),
            wall_s: None,
            final_grad_norm: 1e-11,
            stop_reason: StopReason::GradTol,
        }];
        let csv = summary_csv(&rows);
        assert_eq!(csv.lines().nth(1).unwrap(), "ciag,23.4,,1e-11,grad-tol");
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "method = ig\nrho = 0.5\n").unwrap();
        let args = ConfigArgs {
            config: Some(path),
            method: Some("iag".into()),
            no_timing: true,
            set: vec!["step.iag=iag-frac:10".into()],
            ..Default::default()
        };
        let cfg = args.to_config().unwrap();
        assert_eq!(cfg.method, Method::Iag);
        assert_eq!(cfg.rho, Some(0.5));
        assert!(!cfg.timing);
        assert_eq!(cfg.step_for(Method::Iag), crate::io::StepSpec::IagFrac(10.0));
    }

    #[test]
    fn random_recurrences_satisfy_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (r, delta) = random_recurrence(&mut rng);
            assert!(r.condition_lhs() <= delta * (1.0 + 1e-12));
            assert!(r.window <= 50 && r.q.len() <= 4);
        }
    }

    #[test]
    fn missing_dataset_file_is_an_error_exit() {
        let code = main_with_args(["ciag", "run", "--dataset", "libsvm:/nonexistent/data", "--no-reference"]);
        assert_eq!(code, EXIT_ERROR);
    }

    #[test]
    fn inflated_q_fails_verification() {
        let checks = verify_theory(0, 20, 100.0).unwrap();
        let lemma = checks.iter().find(|c| c.name.starts_with("lemma2_check")).unwrap();
        assert!(!lemma.passed);
    }
}
