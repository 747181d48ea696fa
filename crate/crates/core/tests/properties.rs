use std::path::Path;

use ciag::io::{parse_libsvm_str, to_libsvm_string, LabelMap, LibsvmOptions};
use ciag::optimizers::{ciag_init, ciag_step, InitMode, SelectionRule, SurrogateForm};
use ciag::problems::{generate_synthetic_svm, make_logistic_problem, LabeledDataset, LogisticProblemConfig};
use ciag::theory::{lemma2_check, stepsize_min_term, RateConstants, Recurrence};
use ciag::FiniteSumProblem;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn logistic(d: usize, m: usize, seed: u64, rho: f64) -> FiniteSumProblem {
    let ds = generate_synthetic_svm(d, m, seed).unwrap().dataset;
    make_logistic_problem(&LogisticProblemConfig { rho, dataset: ds }).unwrap()
}

fn dataset_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<bool>)> {
    (1usize..8, 1usize..10).prop_flat_map(|(n, d)| {
        (
            Just(n),
            Just(d),
            prop::collection::vec(prop_oneof![Just(0.0), -1e3..1e3f64], n * d),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

fn theta_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn libsvm_round_trip((n, d, values, signs) in dataset_strategy()) {
        let features = DMatrix::from_row_slice(n, d, &values);
        let labels = signs.iter().map(|s| if *s { 1.0 } else { -1.0 }).collect();
        let ds = LabeledDataset::new(features, labels).unwrap();
        let opts = LibsvmOptions { expected_dim: Some(d), label_map: LabelMap::Sign, append_bias: false };
        let back = parse_libsvm_str(&to_libsvm_string(&ds), &opts, Path::new("mem")).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn step_bound_shrinks_with_delay_and_curvature_change(
        k in 1usize..200,
        lh in 1e-3..1e3f64,
        v in 1e-3..1e3f64,
        q in 1.0..1e3f64,
    ) {
        let c = RateConstants { mu: 1.0, lipschitz: q, hessian_lipschitz: lh, k, v_s: v, epsilon: 0.0 };
        let base = stepsize_min_term(&c).unwrap();
        prop_assert!(base > 0.0);
        let more_delay = RateConstants { k: k + 1, ..c };
        let rougher = RateConstants { hessian_lipschitz: 2.0 * lh, ..c };
        let farther = RateConstants { v_s: 2.0 * v, ..c };
        for changed in [more_delay, rougher, farther] {
            prop_assert!(stepsize_min_term(&changed).unwrap() <= base);
        }
    }

    #[test]
    fn recurrences_within_condition_contract(
        p in 0.0..0.95f64,
        frac in 0.1..0.9f64,
        spend in 0.05..1.0f64,
        eta in 1.1..4.0f64,
        window in 1usize..30,
        r0 in 0.01..10.0f64,
    ) {
        let delta = p + (1.0 - p) * frac;
        let q = (delta - p) * spend / r0.powf(eta - 1.0);
        let r = Recurrence::new(p, vec![q], vec![eta], window, r0).unwrap();
        let report = lemma2_check(&r, delta).unwrap();
        prop_assert!(report.passed(), "{:?}", report);
    }

    #[test]
    fn hessian_spectrum_within_mu_and_l(seed in 0u64..1000, theta in theta_strategy(6)) {
        let p = logistic(6, 30, seed, 1.0 / 30.0);
        let h = p.full_hessian(&DVector::from_vec(theta)).unwrap();
        let eig = h.symmetric_eigen().eigenvalues;
        prop_assert!(eig.min() >= p.mu() * (1.0 - 1e-12));
        prop_assert!(eig.max() <= p.lipschitz() * (1.0 + 1e-8));
    }

    #[test]
    fn component_hessians_are_lipschitz(
        seed in 0u64..1000,
        a in theta_strategy(5),
        b in theta_strategy(5),
        i in 0usize..20,
    ) {
        let p = logistic(5, 20, seed, 0.5);
        let (a, b) = (DVector::from_vec(a), DVector::from_vec(b));
        let c = p.component(i);
        let diff = c.hessian(&a) - c.hessian(&b);
        let spectral = diff.symmetric_eigen().eigenvalues.amax();
        let lh = p.component_hessian_lipschitz()[i];
        prop_assert!(spectral <= lh * (&a - &b).norm() * (1.0 + 1e-9) + 1e-15);
    }

    #[test]
    fn full_gradient_is_deterministic_and_matches_components(seed in 0u64..1000, theta in theta_strategy(7)) {
        let p = logistic(7, 40, seed, 1.0 / 40.0);
        let theta = DVector::from_vec(theta);
        let g1 = p.full_gradient(&theta).unwrap();
        let g2 = p.full_gradient(&theta).unwrap();
        prop_assert_eq!(&g1, &g2);
        let naive = p.components().fold(DVector::zeros(7), |acc, c| acc + c.gradient(&theta));
        prop_assert!((&g1 - &naive).norm() <= 1e-12 * naive.norm().max(1.0));
    }

    #[test]
    fn ciag_surrogate_matches_definition_and_delay_bound(
        seed in 0u64..1000,
        m in 2usize..25,
        batch in 1usize..5,
        steps in 1usize..80,
    ) {
        let p = logistic(4, m, seed, 1.0);
        let gamma = 1.0 / p.lipschitz();
        let rule = if batch == 1 { SelectionRule::Cyclic } else { SelectionRule::CyclicMinibatch(batch.min(m)) };
        let mut s = ciag_init(&p, &DVector::zeros(4), InitMode::Warm, SurrogateForm::Tracked).unwrap();
        for k in 0..steps {
            ciag_step(&mut s, &p, rule.batch(k, m), gamma).unwrap();
            prop_assert!(s.max_delay() <= rule.delay_bound(m));
        }
        let def = s.definitional_surrogate(&p);
        prop_assert!((s.surrogate() - &def).norm() <= 1e-9 * (1.0 + def.norm()));
    }
}
