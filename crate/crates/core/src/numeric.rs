//! Floating-point building blocks shared by the oracles and solvers.
//!
//! With the logistic scaling used throughout (`rho = 1/m`) the gradient
//! Lipschitz constant is around `1e6`, so gradient norms near `1e-10` sit only
//! a few ulps above the rounding noise of a plain left-to-right sum. The
//! helpers here keep aggregate quantities accurate to near working precision.

use nalgebra::{DMatrix, DVector};

/// Error-free transformation `a + b = s + e`.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Compensated dot product (Ogita, Rump and Oishi "Dot2"): the result is as
/// accurate as if computed in twice the working precision and then rounded.
pub fn dot2(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut s = 0.0;
    let mut c = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        let p = a * b;
        let pe = a.mul_add(*b, -p);
        let (t, se) = two_sum(s, p);
        s = t;
        c += pe + se;
    }
    s + c
}

/// Neumaier-compensated scalar accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Coordinate-wise Neumaier accumulator for vectors. Terms are added in the
/// order they are supplied, so results are reproducible bit for bit.
#[derive(Debug, Clone)]
pub struct CompensatedVecSum {
    sum: DVector<f64>,
    comp: DVector<f64>,
}

impl CompensatedVecSum {
    pub fn zeros(dim: usize) -> Self {
        Self {
            sum: DVector::zeros(dim),
            comp: DVector::zeros(dim),
        }
    }

    pub fn add(&mut self, x: &DVector<f64>) {
        self.add_scaled(1.0, x);
    }

    /// Adds `alpha * x`.
    pub fn add_scaled(&mut self, alpha: f64, x: &DVector<f64>) {
        debug_assert_eq!(x.len(), self.sum.len());
        for ((s, c), xi) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(x.iter()) {
            let v = alpha * xi;
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        }
    }

    pub fn value(&self) -> DVector<f64> {
        &self.sum + &self.comp
    }
}

/// An iterate updated with Kahan compensation.
///
/// Steps smaller than half an ulp of a coordinate are not lost: they collect in
/// `carry` until they move the stored value. Oracles only ever see `value`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedIterate {
    value: DVector<f64>,
    carry: DVector<f64>,
}

impl CompensatedIterate {
    pub fn new(value: DVector<f64>) -> Self {
        let carry = DVector::zeros(value.len());
        Self { value, carry }
    }

    pub fn value(&self) -> &DVector<f64> {
        &self.value
    }

    pub fn into_value(self) -> DVector<f64> {
        self.value
    }

    /// Adds `step` and returns the change actually applied to `value`.
    pub fn apply(&mut self, step: &DVector<f64>) -> DVector<f64> {
        let mut moved = DVector::zeros(step.len());
        for j in 0..step.len() {
            let y = step[j] - self.carry[j];
            let t = self.value[j] + y;
            self.carry[j] = (t - self.value[j]) - y;
            moved[j] = t - self.value[j];
            self.value[j] = t;
        }
        moved
    }

    pub fn is_finite(&self) -> bool {
        self.value.iter().all(|v| v.is_finite())
    }
}

/// Result of [`symmetric_spectral_norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest-magnitude eigenvalue of a symmetric matrix by power iteration.
///
/// Stops when successive Rayleigh quotients agree to `rel_tol` or after
/// `max_iter` iterations. The start vector is deterministic.
pub fn symmetric_spectral_norm(a: &DMatrix<f64>, max_iter: usize, rel_tol: f64) -> SpectralEstimate {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "power iteration needs a square matrix");
    if n == 0 {
        return SpectralEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    // Slightly non-uniform start so it is not orthogonal to the top
    // eigenvector of structured matrices.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt() * 1e-3);
    v /= v.norm();
    let mut lambda = 0.0_f64;
    for it in 1..=max_iter {
        let w = a * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return SpectralEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        let next = v.dot(&w).abs();
        v = w / norm;
        if (next - lambda).abs() <= rel_tol * next {
            return SpectralEstimate {
                value: next,
                iterations: it,
                converged: true,
            };
        }
        lambda = next;
    }
    SpectralEstimate {
        value: lambda,
        iterations: max_iter,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot2_recovers_cancelled_terms() {
        let x = DVector::from_vec(vec![1e16, 1.0, -1e16]);
        let y = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        assert_eq!(dot2(&x, &y), 1.0);
        assert_eq!(x.dot(&y), 0.0);
    }

    #[test]
    fn compensated_sum_matches_exact_small_case() {
        let mut s = CompensatedSum::new();
        for v in [1.0, 1e100, 1.0, -1e100] {
            s.add(v);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn compensated_iterate_keeps_sub_ulp_steps() {
        let mut it = CompensatedIterate::new(DVector::from_element(1, 1.0));
        let step = DVector::from_element(1, 1e-17);
        for _ in 0..1000 {
            it.apply(&step);
        }
        assert!((it.value()[0] - (1.0 + 1e-14)).abs() < 1e-16);

        let mut plain = 1.0_f64;
        for _ in 0..1000 {
            plain += 1e-17;
        }
        assert_eq!(plain, 1.0);
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 7.0, 1.0]));
        let est = symmetric_spectral_norm(&a, 500, 1e-12);
        assert!(est.converged);
        assert!((est.value - 7.0).abs() < 1e-9);
    }

    #[test]
    fn power_iteration_rank_one() {
        let x = DVector::from_vec(vec![1.0, 2.0, -2.0]);
        let a = &x * x.transpose();
        let est = symmetric_spectral_norm(&a, 500, 1e-12);
        assert!((est.value - 9.0).abs() < 1e-12);
    }
}
