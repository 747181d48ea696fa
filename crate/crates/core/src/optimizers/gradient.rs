use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::oracle::FiniteSumProblem;

use super::DIVERGENCE_NORM;

fn checked(theta: DVector<f64>) -> Result<DVector<f64>> {
    if theta.iter().any(|v| !v.is_finite()) || theta.norm() > DIVERGENCE_NORM {
        return Err(Error::Divergence { iteration: 1 });
    }
    Ok(theta)
}

/// Full gradient step `θ′ = θ − γ Σ_i ∇f_i(θ)`.
pub fn fg_step(theta: &DVector<f64>, problem: &FiniteSumProblem, gamma: f64) -> Result<DVector<f64>> {
    let g = problem.full_gradient(theta)?;
    checked(theta - g * gamma)
}

/// Incremental gradient step `θ′ = θ − γ ∇f_i(θ)`.
pub fn ig_step(theta: &DVector<f64>, problem: &FiniteSumProblem, i: usize, gamma: f64) -> Result<DVector<f64>> {
    problem.check_dim(theta)?;
    if i >= problem.num_components() {
        return Err(Error::invalid(format!("component {i} out of range")));
    }
    let g = problem.component(i).gradient(theta);
    checked(theta - g * gamma)
}
