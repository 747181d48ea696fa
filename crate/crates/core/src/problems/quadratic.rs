//! Quadratic components `f_i(θ) = ½(θ − c_i)ᵀ A_i (θ − c_i)`. Their Hessians
//! are constant, so `L_{H,i} = 0`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::oracle::{ComponentOracle, FiniteSumProblem};

#[derive(Debug, Clone)]
pub enum Curvature {
    /// `A = w I`.
    Isotropic(f64),
    /// Symmetric positive semidefinite `A`.
    Dense(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct QuadraticComponent {
    center: DVector<f64>,
    curvature: Curvature,
}

impl QuadraticComponent {
    pub fn isotropic(center: DVector<f64>, weight: f64) -> Self {
        Self {
            center,
            curvature: Curvature::Isotropic(weight),
        }
    }

    pub fn dense(center: DVector<f64>, a: DMatrix<f64>) -> Self {
        Self {
            center,
            curvature: Curvature::Dense(a),
        }
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.curvature {
            Curvature::Isotropic(w) => v * *w,
            Curvature::Dense(a) => a * v,
        }
    }
}

impl ComponentOracle for QuadraticComponent {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        let r = theta - &self.center;
        match &self.curvature {
            Curvature::Isotropic(w) => 0.5 * w * r.norm_squared(),
            Curvature::Dense(a) => 0.5 * r.dot(&(a * &r)),
        }
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.apply(&(theta - &self.center))
    }

    fn hessian(&self, _theta: &DVector<f64>) -> DMatrix<f64> {
        let d = self.center.len();
        match &self.curvature {
            Curvature::Isotropic(w) => DMatrix::identity(d, d) * *w,
            Curvature::Dense(a) => a.clone(),
        }
    }

    fn hessian_vector(&self, _theta: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.apply(v)
    }

    fn add_hessian_change(&self, _from: &DVector<f64>, _to: &DVector<f64>, _target: &mut DMatrix<f64>) {}

    fn taylor_remainder(&self, _anchor: &DVector<f64>, _at: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.center.len())
    }
}

fn check_lists(n_centers: usize, n_weights: usize) -> Result<()> {
    if n_centers == 0 {
        return Err(Error::invalid("quadratic problem needs at least one center"));
    }
    if n_centers != n_weights {
        return Err(Error::invalid(format!(
            "{n_centers} centers but {n_weights} curvature entries"
        )));
    }
    Ok(())
}

/// `f_i(θ) = (w_i/2)‖θ − c_i‖²`, with `L = μ = Σ w_i` and minimizer
/// `Σ w_i c_i / Σ w_i` attached to the problem.
pub fn make_quadratic_problem(centers: &[DVector<f64>], weights: &[f64]) -> Result<FiniteSumProblem> {
    check_lists(centers.len(), weights.len())?;
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::invalid(format!("weights must be positive, got {w}")));
    }
    let d = centers[0].len();
    let total: f64 = weights.iter().sum();
    let mut weighted = DVector::zeros(d);
    let mut comps: Vec<Arc<dyn ComponentOracle>> = Vec::with_capacity(centers.len());
    for (c, &w) in centers.iter().zip(weights) {
        if c.len() != d {
            return Err(Error::invalid("all centers must have the same dimension"));
        }
        weighted.axpy(w, c, 1.0);
        comps.push(Arc::new(QuadraticComponent::isotropic(c.clone(), w)));
    }
    let minimizer = weighted / total;
    Ok(FiniteSumProblem::new(comps, total, total, vec![0.0; centers.len()])?.with_known_minimizer(minimizer))
}

/// General quadratic family with per-component curvature matrices; `μ` and
/// `L` are the extreme eigenvalues of `Σ A_i`.
pub fn make_quadratic_problem_with_curvatures(
    centers: &[DVector<f64>],
    curvatures: &[DMatrix<f64>],
) -> Result<FiniteSumProblem> {
    check_lists(centers.len(), curvatures.len())?;
    let d = centers[0].len();
    let mut total = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    let mut comps: Vec<Arc<dyn ComponentOracle>> = Vec::with_capacity(centers.len());
    for (c, a) in centers.iter().zip(curvatures) {
        if c.len() != d || a.nrows() != d || a.ncols() != d {
            return Err(Error::invalid("center and curvature dimensions disagree"));
        }
        if (a - a.transpose()).amax() > 1e-12 * a.amax().max(1.0) {
            return Err(Error::invalid("curvature matrices must be symmetric"));
        }
        total += a;
        rhs += a * c;
        comps.push(Arc::new(QuadraticComponent::dense(c.clone(), a.clone())));
    }
    let eig = total.clone().symmetric_eigen();
    let mu = eig.eigenvalues.min();
    let lipschitz = eig.eigenvalues.max();
    if !(mu > 0.0) {
        return Err(Error::invalid("sum of curvatures is not positive definite"));
    }
    let minimizer = total
        .cholesky()
        .ok_or_else(|| Error::invalid("sum of curvatures is not positive definite"))?
        .solve(&rhs);
    Ok(FiniteSumProblem::new(comps, mu, lipschitz, vec![0.0; centers.len()])?.with_known_minimizer(minimizer))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn centroid_of_two_unit_weights() {
        let p = make_quadratic_problem(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])], &[1.0, 1.0]).unwrap();
        assert_eq!(p.known_minimizer().unwrap(), &v(&[0.5, 0.5]));
        assert_eq!(p.hessian_lipschitz(), 0.0);
    }

    #[test]
    fn single_weighted_center() {
        let c = v(&[2.0, -1.0, 0.5]);
        let p = make_quadratic_problem(std::slice::from_ref(&c), &[3.0]).unwrap();
        assert_eq!(p.known_minimizer().unwrap(), &c);
        assert_eq!(p.lipschitz(), 3.0);
        assert_eq!(p.mu(), 3.0);
    }

    #[test]
    fn rejects_nonpositive_weights_and_mismatched_lists() {
        assert!(make_quadratic_problem(&[v(&[1.0])], &[0.0]).is_err());
        assert!(make_quadratic_problem(&[v(&[1.0])], &[-1.0]).is_err());
        assert!(make_quadratic_problem(&[v(&[1.0])], &[1.0, 2.0]).is_err());
        assert!(make_quadratic_problem(&[], &[]).is_err());
    }

    #[test]
    fn diagonal_curvatures_give_extreme_eigenvalues() {
        let a1 = DMatrix::from_diagonal(&v(&[1.0, 4.0]));
        let a2 = DMatrix::from_diagonal(&v(&[1.0, 6.0]));
        let p = make_quadratic_problem_with_curvatures(&[v(&[1.0, 1.0]), v(&[-1.0, 0.0])], &[a1, a2]).unwrap();
        assert!((p.mu() - 2.0).abs() < 1e-12);
        assert!((p.lipschitz() - 10.0).abs() < 1e-12);
        let star = p.known_minimizer().unwrap();
        assert!(p.full_gradient(star).unwrap().norm() < 1e-12);
    }
}
