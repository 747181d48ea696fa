use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LabeledDataset;
use crate::error::{Error, Result};

/// A separable SVM-with-bias dataset and the parameter that generated it.
#[derive(Debug, Clone)]
pub struct SyntheticSvm {
    pub dataset: LabeledDataset,
    pub theta_true: DVector<f64>,
}

/// Draws `θ_true ~ U[−1,1]^d`, rows `x_i = [x̃_i; 1]` with
/// `x̃_i ~ U[−1,1]^{d−1}`, and labels `y_i = sign⟨x_i, θ_true⟩` (ties go to +1).
pub fn generate_synthetic_svm(d: usize, m: usize, seed: u64) -> Result<SyntheticSvm> {
    if d < 2 {
        return Err(Error::invalid(format!("synthetic data needs d >= 2, got {d}")));
    }
    if m == 0 {
        return Err(Error::invalid("synthetic data needs m >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta_true = DVector::from_fn(d, |_, _| rng.random_range(-1.0..=1.0));
    let mut features = DMatrix::zeros(m, d);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        for j in 0..d - 1 {
            features[(i, j)] = rng.random_range(-1.0..=1.0);
        }
        features[(i, d - 1)] = 1.0;
        let score = features.row(i).transpose().dot(&theta_true);
        labels.push(if score >= 0.0 { 1.0 } else { -1.0 });
    }
    Ok(SyntheticSvm {
        dataset: LabeledDataset::new(features, labels)?,
        theta_true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_coordinate_is_bias() {
        let s = generate_synthetic_svm(5, 40, 3).unwrap();
        assert!(s.dataset.features().column(4).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_synthetic_svm(6, 30, 11).unwrap();
        let b = generate_synthetic_svm(6, 30, 11).unwrap();
        let c = generate_synthetic_svm(6, 30, 12).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.theta_true, b.theta_true);
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn labels_match_generating_parameter() {
        let s = generate_synthetic_svm(51, 1000, 5).unwrap();
        let x = s.dataset.features();
        for (i, &y) in s.dataset.labels().iter().enumerate() {
            let score = x.row(i).transpose().dot(&s.theta_true);
            assert_eq!(y, if score >= 0.0 { 1.0 } else { -1.0 });
            assert!(y * score >= 0.0);
        }
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(generate_synthetic_svm(1, 10, 0).is_err());
        assert!(generate_synthetic_svm(3, 0, 0).is_err());
    }
}
