//! Experimental aggregated-Newton baseline: CIAG's aggregates with the update
//! `θ′ = θ − γ H⁻¹(b + Hθ)`.

use std::ops::Range;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::oracle::FiniteSumProblem;

use super::ciag::{check_batch, CiagState};

/// Above this condition estimate the aggregated Hessian is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Solves `H x = g̃` by Cholesky. The condition estimate is the squared ratio
/// of the extreme Cholesky diagonal entries, a lower bound on `cond₂(H)`.
pub fn newton_direction(state: &CiagState) -> Result<DVector<f64>> {
    let chol = state
        .hessian()
        .clone()
        .cholesky()
        .ok_or(Error::Singular { condition: f64::INFINITY })?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
    let condition = if lo == 0.0 { f64::INFINITY } else { (hi / lo) * (hi / lo) };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    Ok(chol.solve(&state.surrogate()))
}

/// One aggregated-Newton iteration on a [`CiagState`].
pub fn newton_agg_step(state: &mut CiagState, problem: &FiniteSumProblem, batch: Range<usize>, gamma: f64) -> Result<()> {
    check_batch(problem, &batch, gamma)?;
    state.swap(problem, batch);
    let direction = newton_direction(state)?;
    state.advance(gamma, &direction)
}
