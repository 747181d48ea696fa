//! Component oracles, the finite-sum problem and trace records.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::{CompensatedSum, CompensatedVecSum};

/// One summand `f_i` of the objective.
///
/// Implementations must be pure: evaluation never mutates the oracle, so a
/// problem can be shared between threads. All vectors passed in have length
/// [`dim`](ComponentOracle::dim); the problem checks this before dispatching.
///
/// Only `value`, `gradient` and `hessian` are required. The remaining methods
/// have dense default implementations and exist so that structured components
/// (rank-one logistic Hessians) can do the solver's inner work in `O(d)` or a
/// single rank-one update.
pub trait ComponentOracle: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, theta: &DVector<f64>) -> f64;

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64>;

    fn hessian(&self, theta: &DVector<f64>) -> DMatrix<f64>;

    /// `∇²f(θ) v`.
    fn hessian_vector(&self, theta: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.hessian(theta) * v
    }

    /// `target += scale * ∇²f(θ)`.
    fn add_hessian(&self, theta: &DVector<f64>, scale: f64, target: &mut DMatrix<f64>) {
        *target += self.hessian(theta) * scale;
    }

    /// `target += ∇²f(to) − ∇²f(from)`.
    fn add_hessian_change(&self, from: &DVector<f64>, to: &DVector<f64>, target: &mut DMatrix<f64>) {
        *target += self.hessian(to) - self.hessian(from);
    }

    /// First-order Taylor remainder of the gradient,
    /// `∇f(at) − ∇f(anchor) − ∇²f(anchor)(at − anchor)`.
    fn taylor_remainder(&self, anchor: &DVector<f64>, at: &DVector<f64>) -> DVector<f64> {
        let diff = at - anchor;
        self.gradient(at) - self.gradient(anchor) - self.hessian_vector(anchor, &diff)
    }
}

/// `Q = L/μ` and `Q_H = L/L_H`. `q_h` is `+∞` when `L_H = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionNumbers {
    pub q: f64,
    pub q_h: f64,
}

impl ConditionNumbers {
    pub fn q_h_is_infinite(&self) -> bool {
        self.q_h.is_infinite()
    }
}

/// `F(θ) = Σ_i f_i(θ)` together with its regularity constants.
#[derive(Clone)]
pub struct FiniteSumProblem {
    components: Vec<Arc<dyn ComponentOracle>>,
    dim: usize,
    mu: f64,
    lipschitz: f64,
    hessian_lipschitz_per: Vec<f64>,
    hessian_lipschitz: f64,
    known_minimizer: Option<DVector<f64>>,
}

impl fmt::Debug for FiniteSumProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteSumProblem")
            .field("m", &self.components.len())
            .field("d", &self.dim)
            .field("mu", &self.mu)
            .field("L", &self.lipschitz)
            .field("L_H", &self.hessian_lipschitz)
            .finish()
    }
}

impl FiniteSumProblem {
    pub fn new(
        components: Vec<Arc<dyn ComponentOracle>>,
        mu: f64,
        lipschitz: f64,
        hessian_lipschitz_per: Vec<f64>,
    ) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::invalid("a finite-sum problem needs at least one component"));
        };
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if let Some(i) = components.iter().position(|c| c.dim() != dim) {
            return Err(Error::invalid(format!(
                "component {i} has dimension {} but component 0 has {dim}",
                components[i].dim()
            )));
        }
        if hessian_lipschitz_per.len() != components.len() {
            return Err(Error::invalid(format!(
                "{} Hessian Lipschitz constants for {} components",
                hessian_lipschitz_per.len(),
                components.len()
            )));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("strong convexity constant must be positive, got {mu}")));
        }
        if !(lipschitz >= mu && lipschitz.is_finite()) {
            return Err(Error::invalid(format!("need L >= mu > 0, got L = {lipschitz}, mu = {mu}")));
        }
        if hessian_lipschitz_per.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("per-component Hessian Lipschitz constants must be finite and >= 0"));
        }
        let hessian_lipschitz = hessian_lipschitz_per.iter().sum();
        Ok(Self {
            components,
            dim,
            mu,
            lipschitz,
            hessian_lipschitz_per,
            hessian_lipschitz,
            known_minimizer: None,
        })
    }

    /// Attaches a closed-form minimizer (quadratic families).
    pub fn with_known_minimizer(mut self, theta: DVector<f64>) -> Self {
        assert_eq!(theta.len(), self.dim);
        self.known_minimizer = Some(theta);
        self
    }

    pub fn known_minimizer(&self) -> Option<&DVector<f64>> {
        self.known_minimizer.as_ref()
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `L_{H,i}` for each component.
    pub fn component_hessian_lipschitz(&self) -> &[f64] {
        &self.hessian_lipschitz_per
    }

    /// `L_H = Σ_i L_{H,i}`.
    pub fn hessian_lipschitz(&self) -> f64 {
        self.hessian_lipschitz
    }

    pub fn condition_numbers(&self) -> ConditionNumbers {
        let q_h = if self.hessian_lipschitz == 0.0 {
            f64::INFINITY
        } else {
            self.lipschitz / self.hessian_lipschitz
        };
        ConditionNumbers {
            q: self.lipschitz / self.mu,
            q_h,
        }
    }

    pub fn component(&self, i: usize) -> &dyn ComponentOracle {
        self.components[i].as_ref()
    }

    pub fn components(&self) -> impl Iterator<Item = &dyn ComponentOracle> {
        self.components.iter().map(|c| c.as_ref())
    }

    pub fn check_dim(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::invalid(format!(
                "expected a vector of dimension {}, got {}",
                self.dim,
                theta.len()
            )));
        }
        Ok(())
    }

    /// `F(θ)`, summed with compensation in ascending component order.
    pub fn objective(&self, theta: &DVector<f64>) -> Result<f64> {
        self.check_dim(theta)?;
        let mut acc = CompensatedSum::new();
        for c in self.components() {
            acc.add(c.value(theta));
        }
        Ok(acc.value())
    }

    /// `Σ_i ∇f_i(θ)`, summed with compensation in ascending component order.
    pub fn full_gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(theta)?;
        let mut acc = CompensatedVecSum::zeros(self.dim);
        for c in self.components() {
            acc.add(&c.gradient(theta));
        }
        Ok(acc.value())
    }

    /// `Σ_i ∇²f_i(θ)`.
    pub fn full_hessian(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(theta)?;
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for c in self.components() {
            c.add_hessian(theta, 1.0, &mut h);
        }
        Ok(h)
    }
}

/// One row of a solver trace.
///
/// `k` counts component accesses (a minibatch of `B` counts `B`, a full
/// gradient step counts `m`), so `effective_passes = k / m` always.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub effective_passes: f64,
    /// `F(θ^k) − F(θ★)`; absent when no reference solution was supplied.
    pub objective_gap: Option<f64>,
    pub grad_norm: f64,
    /// `‖g̃^k − ∇F(θ^k)‖` for aggregated methods.
    pub surrogate_error: Option<f64>,
    /// `Σ_i L_{H,i} ‖θ_i − θ^k‖²` for CIAG.
    pub error_bound: Option<f64>,
    pub step_size: f64,
    /// Solver time excluding tracing; absent when timing is disabled.
    pub wall_time_s: Option<f64>,
    /// `‖θ^k − θ★‖²`; not part of the CSV schema.
    pub dist_sq: Option<f64>,
}
