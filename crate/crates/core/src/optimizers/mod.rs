//! CIAG and the FG/IG/IAG baselines, step-size schedules, component
//! selection, and the traced run loop.

mod ciag;
mod gradient;
mod iag;
mod newton;
mod schedule;
mod selection;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::numeric::CompensatedIterate;
use crate::oracle::{FiniteSumProblem, TraceRecord};

pub use ciag::{ciag_init, ciag_step, taylor_surrogate, CiagState, InitMode, SurrogateForm};
pub use gradient::{fg_step, ig_step};
pub use iag::{iag_init, iag_step, IagState};
pub use newton::{newton_agg_step, newton_direction, MAX_CONDITION};
pub use schedule::{adaptive_gamma, AdaptiveConstants, StepSizeSchedule};
pub use selection::SelectionRule;

/// Iterates with a larger norm are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;
pub const DEFAULT_GRAD_TOL: f64 = 1e-10;
/// Default access budget is this many passes over the components.
pub const DEFAULT_MAX_PASSES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Ciag,
    Iag,
    Ig,
    Fg,
    NewtonAgg,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Ciag, Method::Iag, Method::Ig, Method::Fg, Method::NewtonAgg];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Ciag => "ciag",
            Method::Iag => "iag",
            Method::Ig => "ig",
            Method::Fg => "fg",
            Method::NewtonAgg => "newton_agg",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria {
    pub grad_tol: f64,
    /// Optional objective-gap tolerance; needs a reference solution.
    pub gap_tol: Option<f64>,
    /// Budget in component accesses.
    pub max_accesses: usize,
}

impl StopCriteria {
    pub fn with_defaults(m: usize) -> Self {
        Self {
            grad_tol: DEFAULT_GRAD_TOL,
            gap_tol: None,
            max_accesses: DEFAULT_MAX_PASSES * m,
        }
    }
}

/// A reference minimizer used for gap and distance diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub theta: DVector<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub schedule: StepSizeSchedule,
    pub selection: SelectionRule,
    pub init: InitMode,
    pub form: SurrogateForm,
    pub stop: StopCriteria,
    /// Record a trace row every this many iterations. Stopping rules are
    /// evaluated at trace rows only.
    pub trace_every: usize,
    pub reference: Option<Reference>,
    pub record_wall_time: bool,
    /// Re-derive the aggregates from stored iterates once per pass.
    pub resync: bool,
}

impl RunOptions {
    pub fn new(schedule: StepSizeSchedule, m: usize) -> Self {
        Self {
            schedule,
            selection: SelectionRule::Cyclic,
            init: InitMode::Warm,
            form: SurrogateForm::Tracked,
            stop: StopCriteria::with_defaults(m),
            trace_every: m.max(1),
            reference: None,
            record_wall_time: true,
            resync: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    GradTol,
    GapTol,
    MaxIters,
    Diverged,
}

impl StopReason {
    pub fn name(&self) -> &'static str {
        match self {
            StopReason::GradTol => "grad-tol",
            StopReason::GapTol => "gap-tol",
            StopReason::MaxIters => "max-iters",
            StopReason::Diverged => "diverged",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub method: Method,
    pub final_theta: DVector<f64>,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub accesses: usize,
    /// Component count, for pass arithmetic.
    pub m: usize,
}

impl RunResult {
    /// `k/m` at the first traced row with `‖∇F‖ ≤ tol`.
    pub fn passes_to_grad_tol(&self, tol: f64) -> Option<f64> {
        self.trace.iter().find(|r| r.grad_norm <= tol).map(|r| r.effective_passes)
    }

    /// `k/m` at the first traced row with objective gap `≤ tol`.
    pub fn passes_to_gap(&self, tol: f64) -> Option<f64> {
        self.trace
            .iter()
            .find(|r| r.objective_gap.is_some_and(|g| g <= tol))
            .map(|r| r.effective_passes)
    }

    pub fn last(&self) -> &TraceRecord {
        self.trace.last().expect("trace is never empty")
    }
}

enum Solver {
    Ciag(CiagState),
    Newton(CiagState),
    Iag(IagState),
    Plain {
        theta: CompensatedIterate,
        accesses: usize,
        iteration: usize,
        full: bool,
    },
}

impl Solver {
    fn theta(&self) -> &DVector<f64> {
        match self {
            Solver::Ciag(s) | Solver::Newton(s) => s.theta(),
            Solver::Iag(s) => s.theta(),
            Solver::Plain { theta, .. } => theta.value(),
        }
    }

    fn accesses(&self) -> usize {
        match self {
            Solver::Ciag(s) | Solver::Newton(s) => s.accesses(),
            Solver::Iag(s) => s.accesses(),
            Solver::Plain { accesses, .. } => *accesses,
        }
    }

    fn iteration(&self) -> usize {
        match self {
            Solver::Ciag(s) | Solver::Newton(s) => s.iteration(),
            Solver::Iag(s) => s.iteration(),
            Solver::Plain { iteration, .. } => *iteration,
        }
    }

    fn step(&mut self, problem: &FiniteSumProblem, batch: std::ops::Range<usize>, gamma: f64) -> Result<()> {
        match self {
            Solver::Ciag(s) => ciag_step(s, problem, batch, gamma),
            Solver::Newton(s) => newton_agg_step(s, problem, batch, gamma),
            Solver::Iag(s) => iag_step(s, problem, batch, gamma),
            Solver::Plain {
                theta,
                accesses,
                iteration,
                full,
            } => {
                let batch = if *full { 0..problem.num_components() } else { batch };
                let g = if *full {
                    problem.full_gradient(theta.value())?
                } else {
                    let mut g = DVector::zeros(problem.dim());
                    for i in batch.clone() {
                        g += problem.component(i).gradient(theta.value());
                    }
                    g
                };
                theta.apply(&(g * -gamma));
                *accesses += batch.len();
                *iteration += 1;
                if !theta.is_finite() || theta.value().norm() > DIVERGENCE_NORM {
                    return Err(Error::Divergence { iteration: *iteration });
                }
                Ok(())
            }
        }
    }

    fn resync(&mut self, problem: &FiniteSumProblem) {
        match self {
            Solver::Ciag(s) | Solver::Newton(s) => s.resync(problem),
            Solver::Iag(s) => s.resync(),
            Solver::Plain { .. } => {}
        }
    }

    fn surrogate_error(&self, problem: &FiniteSumProblem) -> Result<Option<f64>> {
        Ok(match self {
            Solver::Ciag(s) | Solver::Newton(s) => Some(s.surrogate_error(problem)?),
            Solver::Iag(s) => Some(s.surrogate_error(problem)),
            Solver::Plain { .. } => None,
        })
    }

    fn error_bound(&self, problem: &FiniteSumProblem) -> Option<f64> {
        match self {
            Solver::Ciag(s) => Some(s.error_bound(problem)),
            _ => None,
        }
    }
}

fn validate(problem: &FiniteSumProblem, method: Method, options: &RunOptions, theta0: &DVector<f64>) -> Result<()> {
    problem.check_dim(theta0)?;
    options.schedule.validate()?;
    options.selection.validate(problem.num_components())?;
    if options.trace_every == 0 {
        return Err(Error::invalid("trace_every must be at least 1"));
    }
    if !(options.stop.grad_tol >= 0.0) {
        return Err(Error::invalid("grad_tol must be >= 0"));
    }
    if options.stop.gap_tol.is_some() && options.reference.is_none() {
        return Err(Error::invalid("a gap tolerance needs a reference solution"));
    }
    if let Some(r) = &options.reference {
        problem.check_dim(&r.theta)?;
    }
    if matches!(options.schedule, StepSizeSchedule::AdaptiveRamp { .. }) && !matches!(method, Method::Ciag | Method::NewtonAgg) {
        log::warn!("adaptive schedule is designed for CIAG; applying it to {method} anyway");
    }
    Ok(())
}

/// Runs `method` from `theta0` until a stopping rule fires.
///
/// `k` in the trace counts component accesses (warm-start passes are not
/// counted); full-gradient, objective and surrogate evaluations made for the
/// trace are excluded from both `k` and the recorded wall time.
pub fn run(problem: &FiniteSumProblem, method: Method, options: &RunOptions, theta0: &DVector<f64>) -> Result<RunResult> {
    validate(problem, method, options, theta0)?;
    let m = problem.num_components();
    let mut solver = match method {
        Method::Ciag => Solver::Ciag(ciag_init(problem, theta0, options.init, options.form)?),
        Method::NewtonAgg => Solver::Newton(ciag_init(problem, theta0, options.init, options.form)?),
        Method::Iag => Solver::Iag(iag_init(problem, theta0)?),
        Method::Ig | Method::Fg => Solver::Plain {
            theta: CompensatedIterate::new(theta0.clone()),
            accesses: 0,
            iteration: 0,
            full: method == Method::Fg,
        },
    };
    let iterations_per_pass = if method == Method::Fg {
        1
    } else {
        options.selection.iterations_per_pass(m)
    };
    let adaptive = match options.schedule {
        StepSizeSchedule::AdaptiveRamp { ramp, check_interval, .. } => Some((ramp, check_interval)),
        _ => None,
    };
    let adaptive_constants = AdaptiveConstants {
        mu: problem.mu(),
        lipschitz: problem.lipschitz(),
        hessian_lipschitz: problem.hessian_lipschitz(),
        k: options.selection.delay_bound(m),
    };
    let mut adaptive_current = options.schedule.initial_gamma();
    let mut gamma = options.schedule.gamma(1, adaptive_current);
    let mut elapsed = Duration::ZERO;
    let mut trace = Vec::new();

    let record = |solver: &Solver, gamma: f64, elapsed: Duration, trace: &mut Vec<TraceRecord>| -> Result<()> {
        let theta = solver.theta();
        let grad_norm = problem.full_gradient(theta)?.norm();
        let (objective_gap, dist_sq) = match &options.reference {
            Some(r) => (
                Some(problem.objective(theta)? - r.objective),
                Some((theta - &r.theta).norm_squared()),
            ),
            None => (None, None),
        };
        let k = solver.accesses();
        trace.push(TraceRecord {
            k,
            effective_passes: k as f64 / m as f64,
            objective_gap,
            grad_norm,
            surrogate_error: solver.surrogate_error(problem)?,
            error_bound: solver.error_bound(problem),
            step_size: gamma,
            wall_time_s: options.record_wall_time.then_some(elapsed.as_secs_f64()),
            dist_sq,
        });
        Ok(())
    };
    let stop_reason = |r: &TraceRecord, accesses: usize| -> Option<StopReason> {
        if !(r.grad_norm.is_finite()) {
            return Some(StopReason::Diverged);
        }
        if r.grad_norm <= options.stop.grad_tol {
            return Some(StopReason::GradTol);
        }
        if let (Some(tol), Some(gap)) = (options.stop.gap_tol, r.objective_gap) {
            if gap <= tol {
                return Some(StopReason::GapTol);
            }
        }
        (accesses >= options.stop.max_accesses).then_some(StopReason::MaxIters)
    };

    record(&solver, gamma, elapsed, &mut trace)?;
    let mut reason = stop_reason(trace.last().expect("just pushed"), solver.accesses());
    while reason.is_none() {
        let it = solver.iteration();
        let batch = options.selection.batch(it, m);
        gamma = options.schedule.gamma(solver.accesses() + 1, adaptive_current);
        let start = Instant::now();
        let outcome = solver.step(problem, batch, gamma);
        match outcome {
            Ok(()) => {}
            Err(Error::Divergence { iteration }) => {
                log::info!("{method} diverged at iteration {iteration}");
                elapsed += start.elapsed();
                record(&solver, gamma, elapsed, &mut trace)?;
                reason = Some(StopReason::Diverged);
                break;
            }
            Err(e) => return Err(e),
        }
        let done = solver.iteration();
        if options.resync && done % iterations_per_pass == 0 {
            solver.resync(problem);
        }
        elapsed += start.elapsed();

        if let Some((ramp, check_interval)) = adaptive {
            if done % check_interval == 0 {
                let g = problem.full_gradient(solver.theta())?.norm();
                let v = (g / problem.mu()).powi(2);
                adaptive_current = adaptive_gamma(adaptive_current, &adaptive_constants, v, ramp);
            }
        }
        let out_of_budget = solver.accesses() >= options.stop.max_accesses;
        if done % options.trace_every == 0 || out_of_budget {
            record(&solver, gamma, elapsed, &mut trace)?;
            reason = stop_reason(trace.last().expect("just pushed"), solver.accesses());
        }
    }
    let stop_reason = reason.expect("loop exits with a reason");
    let iterations = solver.iteration();
    let accesses = solver.accesses();
    let final_theta = match solver {
        Solver::Ciag(s) | Solver::Newton(s) => s.into_theta(),
        Solver::Iag(s) => s.into_theta(),
        Solver::Plain { theta, .. } => theta.into_value(),
    };
    Ok(RunResult {
        method,
        final_theta,
        trace,
        converged: matches!(stop_reason, StopReason::GradTol | StopReason::GapTol),
        stop_reason,
        iterations,
        accesses,
        m,
    })
}
