use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::{CompensatedIterate, CompensatedVecSum};
use crate::oracle::FiniteSumProblem;

use super::DIVERGENCE_NORM;

/// How the aggregates are seeded before the first iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    /// One full pass at `θ¹`: `H = ∇²F(θ¹)` and `b + Hθ¹ = ∇F(θ¹)`.
    #[default]
    Warm,
    /// `b = 0`, `H = mI`.
    Cold,
}

/// Which vector the state carries alongside `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SurrogateForm {
    /// The surrogate `g = b + Hθ` itself, updated by the swapped component's
    /// Taylor remainder and by `H(θ^{k+1} − θ^k)`. Avoids the cancellation in
    /// `b + Hθ` when `‖b‖` is many orders larger than the gradient.
    #[default]
    Tracked,
    /// `b` as in the textbook update, with `b + Hθ` formed every step.
    Literal,
}

/// State of the curvature-aided incremental aggregated gradient method.
#[derive(Debug, Clone)]
pub struct CiagState {
    theta: CompensatedIterate,
    stored: Vec<DVector<f64>>,
    last_access: Vec<usize>,
    h: DMatrix<f64>,
    /// `g` for [`SurrogateForm::Tracked`], `b` for [`SurrogateForm::Literal`].
    agg: DVector<f64>,
    form: SurrogateForm,
    init: InitMode,
    accesses: usize,
    iteration: usize,
}

/// `Σ_i [∇f_i(θ_i) + ∇²f_i(θ_i)(θ − θ_i)]` with compensated summation.
pub fn taylor_surrogate(problem: &FiniteSumProblem, stored: &[DVector<f64>], theta: &DVector<f64>) -> DVector<f64> {
    let mut acc = CompensatedVecSum::zeros(problem.dim());
    for (c, anchor) in problem.components().zip(stored) {
        acc.add(&c.gradient(anchor));
        acc.add(&c.hessian_vector(anchor, &(theta - anchor)));
    }
    acc.value()
}

pub fn ciag_init(problem: &FiniteSumProblem, theta1: &DVector<f64>, mode: InitMode, form: SurrogateForm) -> Result<CiagState> {
    problem.check_dim(theta1)?;
    if theta1.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial point must be finite"));
    }
    let m = problem.num_components();
    let d = problem.dim();
    let (h, agg) = match mode {
        InitMode::Warm => {
            let h = problem.full_hessian(theta1)?;
            let agg = match form {
                SurrogateForm::Tracked => problem.full_gradient(theta1)?,
                SurrogateForm::Literal => {
                    let mut acc = CompensatedVecSum::zeros(d);
                    for c in problem.components() {
                        acc.add(&c.gradient(theta1));
                        acc.add_scaled(-1.0, &c.hessian_vector(theta1, theta1));
                    }
                    acc.value()
                }
            };
            (h, agg)
        }
        InitMode::Cold => {
            let mf = m as f64;
            let agg = match form {
                SurrogateForm::Tracked => theta1 * mf,
                SurrogateForm::Literal => DVector::zeros(d),
            };
            (DMatrix::identity(d, d) * mf, agg)
        }
    };
    Ok(CiagState {
        theta: CompensatedIterate::new(theta1.clone()),
        stored: vec![theta1.clone(); m],
        last_access: vec![0; m],
        h,
        agg,
        form,
        init: mode,
        accesses: 0,
        iteration: 0,
    })
}

impl CiagState {
    pub fn theta(&self) -> &DVector<f64> {
        self.theta.value()
    }

    pub fn into_theta(self) -> DVector<f64> {
        self.theta.into_value()
    }

    /// Aggregated Hessian `H = Σ_i ∇²f_i(θ_i)` (plus the cold-start residual).
    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// `θ_i`, the iterate at which component `i` was last accessed.
    pub fn stored_iterates(&self) -> &[DVector<f64>] {
        &self.stored
    }

    /// Component accesses so far.
    pub fn accesses(&self) -> usize {
        self.accesses
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn form(&self) -> SurrogateForm {
        self.form
    }

    pub fn init_mode(&self) -> InitMode {
        self.init
    }

    /// `b = g̃ − Hθ`.
    pub fn b(&self) -> DVector<f64> {
        match self.form {
            SurrogateForm::Tracked => &self.agg - &self.h * self.theta.value(),
            SurrogateForm::Literal => self.agg.clone(),
        }
    }

    /// The gradient surrogate `g̃ = b + Hθ` used by the next update.
    pub fn surrogate(&self) -> DVector<f64> {
        match self.form {
            SurrogateForm::Tracked => self.agg.clone(),
            SurrogateForm::Literal => &self.agg + &self.h * self.theta.value(),
        }
    }

    /// `max_i (k − τ_i^k)` in iterations.
    pub fn max_delay(&self) -> usize {
        self.last_access
            .iter()
            .map(|&t| self.iteration - t)
            .max()
            .unwrap_or(0)
    }

    /// The surrogate recomputed from its definition at the stored iterates.
    pub fn definitional_surrogate(&self, problem: &FiniteSumProblem) -> DVector<f64> {
        taylor_surrogate(problem, &self.stored, self.theta.value())
    }

    /// `‖g̃ − ∇F(θ)‖`. After a warm start this equals
    /// `‖Σ_i (∇f_i(θ) − ∇f_i(θ_i) − ∇²f_i(θ_i)(θ − θ_i))‖`, which is evaluated
    /// directly so that it is not swamped by rounding in `g̃` and `∇F`.
    pub fn surrogate_error(&self, problem: &FiniteSumProblem) -> Result<f64> {
        let theta = self.theta.value();
        match self.init {
            InitMode::Warm => {
                let mut acc = CompensatedVecSum::zeros(problem.dim());
                for (c, anchor) in problem.components().zip(&self.stored) {
                    acc.add(&c.taylor_remainder(anchor, theta));
                }
                Ok(acc.value().norm())
            }
            InitMode::Cold => Ok((self.surrogate() - problem.full_gradient(theta)?).norm()),
        }
    }

    /// `Σ_i L_{H,i} ‖θ_i − θ‖²`.
    pub fn error_bound(&self, problem: &FiniteSumProblem) -> f64 {
        let theta = self.theta.value();
        problem
            .component_hessian_lipschitz()
            .iter()
            .zip(&self.stored)
            .map(|(lh, s)| if *lh == 0.0 { 0.0 } else { lh * (s - theta).norm_squared() })
            .sum()
    }

    /// Replaces components `batch` in the aggregates by their expansion at
    /// the current iterate.
    pub(crate) fn swap(&mut self, problem: &FiniteSumProblem, batch: Range<usize>) {
        let theta = self.theta.value().clone();
        for i in batch {
            let c = problem.component(i);
            match self.form {
                SurrogateForm::Tracked => self.agg += c.taylor_remainder(&self.stored[i], &theta),
                SurrogateForm::Literal => {
                    let old = &self.stored[i];
                    self.agg += c.gradient(&theta) - c.hessian_vector(&theta, &theta);
                    self.agg -= c.gradient(old) - c.hessian_vector(old, old);
                }
            }
            c.add_hessian_change(&self.stored[i], &theta, &mut self.h);
            self.stored[i].copy_from(&theta);
            self.last_access[i] = self.iteration;
            self.accesses += 1;
        }
    }

    /// `θ ← θ − γ·direction`, keeping a tracked surrogate consistent.
    pub(crate) fn advance(&mut self, gamma: f64, direction: &DVector<f64>) -> Result<()> {
        let moved = self.theta.apply(&(direction * -gamma));
        if self.form == SurrogateForm::Tracked {
            self.agg.gemv(1.0, &self.h, &moved, 1.0);
        }
        self.iteration += 1;
        let theta = self.theta.value();
        if !self.theta.is_finite() || theta.norm() > DIVERGENCE_NORM {
            return Err(Error::Divergence {
                iteration: self.iteration,
            });
        }
        Ok(())
    }

    /// Recomputes `H` and a tracked `g` from the stored iterates. This is a
    /// no-op for the literal form and after a cold start, where the aggregates
    /// intentionally differ from their definition.
    pub fn resync(&mut self, problem: &FiniteSumProblem) {
        if self.form != SurrogateForm::Tracked || self.init != InitMode::Warm {
            return;
        }
        let d = problem.dim();
        let mut h = DMatrix::zeros(d, d);
        for (c, anchor) in problem.components().zip(&self.stored) {
            c.add_hessian(anchor, 1.0, &mut h);
        }
        self.h = h;
        self.agg = self.definitional_surrogate(problem);
    }
}

/// One CIAG iteration: swap every member of `batch` into the aggregates at
/// `θ^k`, then `θ^{k+1} = θ^k − γ(b + Hθ^k)`.
///
/// On divergence the state holds the offending iterate.
pub fn ciag_step(state: &mut CiagState, problem: &FiniteSumProblem, batch: Range<usize>, gamma: f64) -> Result<()> {
    check_batch(problem, &batch, gamma)?;
    state.swap(problem, batch);
    let direction = state.surrogate();
    state.advance(gamma, &direction)
}

pub(crate) fn check_batch(problem: &FiniteSumProblem, batch: &Range<usize>, gamma: f64) -> Result<()> {
    if batch.is_empty() || batch.end > problem.num_components() {
        return Err(Error::invalid(format!(
            "component range {batch:?} is outside 0..{}",
            problem.num_components()
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("step size must be positive, got {gamma}")));
    }
    Ok(())
}
