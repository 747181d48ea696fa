//! ℓ2-regularized logistic regression components,
//! `f_i(θ) = (1/ρ) log(1 + exp(−y_i⟨x_i, θ⟩)) + ½‖θ‖²`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::numeric::{dot2, symmetric_spectral_norm};
use crate::oracle::{ComponentOracle, FiniteSumProblem};

pub const POWER_ITERATION_MAX_ITER: usize = 500;
pub const POWER_ITERATION_TOL: f64 = 1e-9;

/// `log(1 + e^{−u})` without overflow.
pub fn logistic_loss(u: f64) -> f64 {
    if u >= 0.0 {
        (-u).exp().ln_1p()
    } else {
        -u + u.exp().ln_1p()
    }
}

/// `σ(u) = 1 / (1 + e^{−u})`.
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// First derivative of [`logistic_loss`]: `−σ(−u)`.
pub fn logistic_slope(u: f64) -> f64 {
    -sigmoid(-u)
}

/// Second derivative of [`logistic_loss`]: `σ(u)σ(−u)`.
pub fn logistic_curvature(u: f64) -> f64 {
    let e = (-u.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// `ℓ'(u1) − ℓ'(u2)`, using whichever form of the sigmoid avoids cancellation
/// against 1.
fn slope_difference(u1: f64, u2: f64) -> f64 {
    if u2 >= 0.0 {
        sigmoid(-u2) - sigmoid(-u1)
    } else {
        sigmoid(u1) - sigmoid(u2)
    }
}

/// Scalar Taylor remainder `ℓ'(u + δ) − ℓ'(u) − ℓ''(u)δ`.
///
/// Below `|δ| = 1e-3` the remainder is evaluated from its series so that it
/// keeps full relative accuracy instead of cancelling to rounding noise.
pub fn slope_remainder(u: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    if delta.abs() <= 1e-3 {
        let s = sigmoid(u);
        let a = logistic_curvature(u);
        let w = 1.0 - 2.0 * s;
        let d3 = a * w;
        let d4 = a * w * w - 2.0 * a * a;
        let d5 = a * w * w * w - 8.0 * a * a * w;
        let d6 = a * w.powi(4) - 22.0 * a * a * w * w + 16.0 * a * a * a;
        let d2 = delta * delta;
        d2 * (d3 / 2.0 + delta * (d4 / 6.0 + delta * (d5 / 24.0 + delta * d6 / 120.0)))
    } else {
        slope_difference(u + delta, u) - logistic_curvature(u) * delta
    }
}

#[derive(Debug, Clone)]
pub struct LogisticComponent {
    x: DVector<f64>,
    y: f64,
    inv_rho: f64,
}

impl LogisticComponent {
    pub fn new(x: DVector<f64>, y: f64, rho: f64) -> Self {
        debug_assert!(y == 1.0 || y == -1.0);
        Self { x, y, inv_rho: 1.0 / rho }
    }

    /// `y⟨x, θ⟩`.
    pub fn margin(&self, theta: &DVector<f64>) -> f64 {
        self.y * dot2(&self.x, theta)
    }

    pub fn features(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn label(&self) -> f64 {
        self.y
    }

    /// `(1/ρ)‖x xᵀ‖₂ = (1/ρ)‖x‖²`.
    pub fn hessian_lipschitz(&self) -> f64 {
        self.inv_rho * self.x.norm_squared()
    }

    fn rank_one_update(&self, scale: f64, target: &mut DMatrix<f64>) {
        if scale == 0.0 {
            return;
        }
        let d = self.x.len();
        for j in 0..d {
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            let mut col = target.column_mut(j);
            for i in 0..d {
                // a * (x_i x_j) keeps the update exactly symmetric.
                col[i] += scale * (self.x[i] * xj);
            }
        }
    }
}

impl ComponentOracle for LogisticComponent {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        self.inv_rho * logistic_loss(self.margin(theta)) + 0.5 * theta.norm_squared()
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let coef = self.inv_rho * logistic_slope(self.margin(theta)) * self.y;
        let mut g = theta.clone();
        g.axpy(coef, &self.x, 1.0);
        g
    }

    fn hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let d = self.x.len();
        let mut h = DMatrix::identity(d, d);
        self.rank_one_update(self.inv_rho * logistic_curvature(self.margin(theta)), &mut h);
        h
    }

    fn hessian_vector(&self, theta: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let c = self.inv_rho * logistic_curvature(self.margin(theta));
        let mut out = v.clone();
        out.axpy(c * self.x.dot(v), &self.x, 1.0);
        out
    }

    fn add_hessian(&self, theta: &DVector<f64>, scale: f64, target: &mut DMatrix<f64>) {
        let c = self.inv_rho * logistic_curvature(self.margin(theta));
        self.rank_one_update(scale * c, target);
        for i in 0..self.x.len() {
            target[(i, i)] += scale;
        }
    }

    fn add_hessian_change(&self, from: &DVector<f64>, to: &DVector<f64>, target: &mut DMatrix<f64>) {
        // The identity from the regularizer cancels.
        let dc = logistic_curvature(self.margin(to)) - logistic_curvature(self.margin(from));
        self.rank_one_update(self.inv_rho * dc, target);
    }

    fn taylor_remainder(&self, anchor: &DVector<f64>, at: &DVector<f64>) -> DVector<f64> {
        // The regularizer is quadratic and contributes nothing.
        let u = self.margin(anchor);
        let delta = self.y * dot2(&self.x, &(at - anchor));
        let r = slope_remainder(u, delta);
        &self.x * (self.inv_rho * r * self.y)
    }
}

/// Regularization strength and data for [`make_logistic_problem`].
#[derive(Debug, Clone)]
pub struct LogisticProblemConfig {
    pub rho: f64,
    pub dataset: LabeledDataset,
}

impl LogisticProblemConfig {
    /// `ρ = 1/m`.
    pub fn with_default_rho(dataset: LabeledDataset) -> Self {
        let rho = 1.0 / dataset.len() as f64;
        Self { rho, dataset }
    }
}

/// Builds the logistic finite-sum problem with
/// `L = (1/ρ)‖Σ x_i x_iᵀ‖₂ + m`, `L_{H,i} = (1/ρ)‖x_i‖²` and `μ = m`.
pub fn make_logistic_problem(cfg: &LogisticProblemConfig) -> Result<FiniteSumProblem> {
    let data = &cfg.dataset;
    if data.is_empty() {
        return Err(Error::invalid("logistic problem needs a nonempty dataset"));
    }
    if !(cfg.rho > 0.0 && cfg.rho.is_finite()) {
        return Err(Error::invalid(format!("rho must be positive, got {}", cfg.rho)));
    }
    let m = data.len();
    let features = data.features();
    let gram = features.transpose() * features;
    let spectral = symmetric_spectral_norm(&gram, POWER_ITERATION_MAX_ITER, POWER_ITERATION_TOL);
    if !spectral.converged {
        log::warn!(
            "power iteration stopped after {} iterations without reaching {POWER_ITERATION_TOL:e}",
            spectral.iterations
        );
    }
    let lipschitz = spectral.value / cfg.rho + m as f64;

    let mut components: Vec<Arc<dyn ComponentOracle>> = Vec::with_capacity(m);
    let mut lh = Vec::with_capacity(m);
    for i in 0..m {
        let x = features.row(i).transpose();
        let comp = LogisticComponent::new(x, data.labels()[i], cfg.rho);
        lh.push(comp.hessian_lipschitz());
        components.push(Arc::new(comp));
    }
    FiniteSumProblem::new(components, m as f64, lipschitz, lh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_is_stable_at_extremes() {
        assert!((logistic_loss(0.0) - std::f64::consts::LN_2).abs() < 1e-16);
        assert_eq!(logistic_loss(800.0), 0.0);
        assert!((logistic_loss(-800.0) - 800.0).abs() < 1e-12);
        assert!(logistic_slope(-800.0) == -1.0);
        assert!(logistic_curvature(800.0) >= 0.0);
        assert_eq!(logistic_curvature(0.0), 0.25);
    }

    #[test]
    fn slope_remainder_series_matches_direct_form() {
        for &u in &[-3.0, -0.5, 0.0, 0.7, 4.0] {
            for &delta in &[1e-3, -1e-3, 5e-4] {
                let series = slope_remainder(u, delta);
                // ∫₀^δ (ℓ''(u+t) − ℓ''(u)) dt by composite Simpson; the integrand
                // is small, so this avoids the cancellation of the closed form.
                let n = 200;
                let h = delta / n as f64;
                let f = |t: f64| logistic_curvature(u + t) - logistic_curvature(u);
                let inner: f64 = (1..n).map(|j| f(j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 }).sum();
                let direct = h / 3.0 * (f(0.0) + inner + f(delta));
                assert!(
                    (series - direct).abs() <= 1e-9 * direct.abs() + 1e-18,
                    "u={u} delta={delta}: {series} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn single_sample_constants() {
        let ds = LabeledDataset::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), vec![1.0]).unwrap();
        let p = make_logistic_problem(&LogisticProblemConfig { rho: 1.0, dataset: ds }).unwrap();
        assert!((p.lipschitz() - 2.0).abs() < 1e-9);
        assert_eq!(p.component_hessian_lipschitz(), &[1.0]);
        assert_eq!(p.mu(), 1.0);
    }

    #[test]
    fn rejects_bad_config() {
        let ds = LabeledDataset::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), vec![1.0]).unwrap();
        assert!(make_logistic_problem(&LogisticProblemConfig { rho: 0.0, dataset: ds.clone() }).is_err());
        assert!(make_logistic_problem(&LogisticProblemConfig { rho: -1.0, dataset: ds }).is_err());
        let empty = LabeledDataset::new(DMatrix::zeros(0, 2), vec![]).unwrap();
        assert!(make_logistic_problem(&LogisticProblemConfig { rho: 1.0, dataset: empty }).is_err());
    }

    #[test]
    fn structured_hooks_agree_with_dense_defaults() {
        let c = LogisticComponent::new(DVector::from_vec(vec![0.3, -1.2, 0.8]), -1.0, 0.5);
        let a = DVector::from_vec(vec![0.1, 0.4, -0.2]);
        let b = DVector::from_vec(vec![-0.6, 0.3, 0.9]);
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);

        let hv = c.hessian_vector(&a, &v);
        assert!((hv - c.hessian(&a) * &v).norm() < 1e-12);

        let mut h = DMatrix::zeros(3, 3);
        c.add_hessian_change(&a, &b, &mut h);
        assert!((h - (c.hessian(&b) - c.hessian(&a))).norm() < 1e-12);

        let mut h2 = DMatrix::zeros(3, 3);
        c.add_hessian(&a, -2.0, &mut h2);
        assert!((h2 + c.hessian(&a) * 2.0).norm() < 1e-12);

        let r = c.taylor_remainder(&a, &b);
        let direct = c.gradient(&b) - c.gradient(&a) - c.hessian(&a) * (&b - &a);
        assert!((r - direct).norm() < 1e-12);
    }
}
