//! Concrete problem families, synthetic data and the reference solver.

mod logistic;
mod quadratic;
mod reference;
mod synthetic;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use logistic::{
    logistic_curvature, logistic_loss, logistic_slope, make_logistic_problem, sigmoid, slope_remainder,
    LogisticComponent, LogisticProblemConfig,
};
pub use quadratic::{make_quadratic_problem, make_quadratic_problem_with_curvatures, Curvature, QuadraticComponent};
pub use reference::{solve_reference, solve_reference_best_effort, ReferenceSolution, REFERENCE_MAX_ITER, REFERENCE_TOL};
pub use synthetic::{generate_synthetic_svm, SyntheticSvm};

/// Feature matrix (row `i` is `x_iᵀ`) with labels in `{−1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: DMatrix<f64>,
    labels: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<f64>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::invalid(format!("label {} at row {i} is not +1 or -1", labels[i])));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature values must be finite"));
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Number of samples `m`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimension `d`.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Appends a constant-one column.
    pub fn with_bias_column(&self) -> Self {
        let d = self.dim();
        let features = self.features.clone().insert_column(d, 1.0);
        Self {
            features,
            labels: self.labels.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_sign_labels() {
        let x = DMatrix::zeros(2, 1);
        assert!(LabeledDataset::new(x.clone(), vec![1.0, 0.0]).is_err());
        assert!(LabeledDataset::new(x.clone(), vec![1.0]).is_err());
        assert!(LabeledDataset::new(x, vec![1.0, -1.0]).is_ok());
        let bad = DMatrix::from_element(1, 1, f64::NAN);
        assert!(LabeledDataset::new(bad, vec![1.0]).is_err());
    }

    #[test]
    fn bias_column_is_appended_last() {
        let ds = LabeledDataset::new(DMatrix::from_row_slice(2, 1, &[3.0, 4.0]), vec![1.0, -1.0]).unwrap();
        let b = ds.with_bias_column();
        assert_eq!(b.dim(), 2);
        assert_eq!(b.features()[(0, 1)], 1.0);
        assert_eq!(b.features()[(1, 0)], 4.0);
    }
}
