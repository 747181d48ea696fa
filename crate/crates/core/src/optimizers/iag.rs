use std::ops::Range;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::numeric::{CompensatedIterate, CompensatedVecSum};
use crate::oracle::FiniteSumProblem;

use super::ciag::check_batch;
use super::DIVERGENCE_NORM;

/// State of the incremental aggregated gradient method.
#[derive(Debug, Clone)]
pub struct IagState {
    theta: CompensatedIterate,
    stored: Vec<DVector<f64>>,
    gradients: Vec<DVector<f64>>,
    g_sum: DVector<f64>,
    accesses: usize,
    iteration: usize,
}

/// Seeds every stored gradient at `θ¹`, so `g_sum = ∇F(θ¹)`.
pub fn iag_init(problem: &FiniteSumProblem, theta1: &DVector<f64>) -> Result<IagState> {
    problem.check_dim(theta1)?;
    if theta1.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial point must be finite"));
    }
    let gradients: Vec<DVector<f64>> = problem.components().map(|c| c.gradient(theta1)).collect();
    let mut state = IagState {
        theta: CompensatedIterate::new(theta1.clone()),
        stored: vec![theta1.clone(); problem.num_components()],
        gradients,
        g_sum: DVector::zeros(problem.dim()),
        accesses: 0,
        iteration: 0,
    };
    state.resync();
    Ok(state)
}

impl IagState {
    pub fn theta(&self) -> &DVector<f64> {
        self.theta.value()
    }

    pub fn into_theta(self) -> DVector<f64> {
        self.theta.into_value()
    }

    /// `Σ_i ∇f_i(θ_i)`.
    pub fn g_sum(&self) -> &DVector<f64> {
        &self.g_sum
    }

    pub fn stored_iterates(&self) -> &[DVector<f64>] {
        &self.stored
    }

    pub fn accesses(&self) -> usize {
        self.accesses
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// `‖Σ_i (∇f_i(θ_i) − ∇f_i(θ))‖`.
    pub fn surrogate_error(&self, problem: &FiniteSumProblem) -> f64 {
        let theta = self.theta.value();
        let mut acc = CompensatedVecSum::zeros(problem.dim());
        for (c, g) in problem.components().zip(&self.gradients) {
            acc.add(&(g - c.gradient(theta)));
        }
        acc.value().norm()
    }

    /// Re-sums the stored gradients.
    pub fn resync(&mut self) {
        let mut acc = CompensatedVecSum::zeros(self.g_sum.len());
        for g in &self.gradients {
            acc.add(g);
        }
        self.g_sum = acc.value();
    }
}

/// `g_sum ← g_sum − ∇f_i(θ_i) + ∇f_i(θ^k)` for every `i` in `batch`, then
/// `θ^{k+1} = θ^k − γ g_sum`.
pub fn iag_step(state: &mut IagState, problem: &FiniteSumProblem, batch: Range<usize>, gamma: f64) -> Result<()> {
    check_batch(problem, &batch, gamma)?;
    let theta = state.theta.value().clone();
    for i in batch {
        let fresh = problem.component(i).gradient(&theta);
        state.g_sum += &fresh - &state.gradients[i];
        state.gradients[i] = fresh;
        state.stored[i].copy_from(&theta);
        state.accesses += 1;
    }
    state.theta.apply(&(&state.g_sum * -gamma));
    state.iteration += 1;
    if !state.theta.is_finite() || state.theta.value().norm() > DIVERGENCE_NORM {
        return Err(Error::Divergence {
            iteration: state.iteration,
        });
    }
    Ok(())
}
