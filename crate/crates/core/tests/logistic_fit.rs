//! Weighted logistic regression against a first-order reference fit.

mod common;

use common::logistic_cases;
use lrcd::logistic;
use lrcd::CovariateMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain gradient ascent with step `1 / L`, `L = trace(X'X) / 4` bounding the
/// Hessian norm. Returns the estimate and its gradient max-norm.
fn gradient_ascent(x: &CovariateMatrix, y: &[f64]) -> (Vec<f64>, f64) {
    let q = x.n_coef();
    let trace: f64 = (0..x.n())
        .map(|i| (0..q).map(|j| x.design(i, j).powi(2)).sum::<f64>())
        .sum();
    let step = 4.0 / trace;
    let mut beta = vec![0.0; q];
    let mut norm = f64::INFINITY;
    for _ in 0..2_000_000 {
        let mut grad = vec![0.0; q];
        for (i, &yi) in y.iter().enumerate() {
            let r = yi - 1.0 / (1.0 + (-x.linear_predictor(i, &beta)).exp());
            for (j, g) in grad.iter_mut().enumerate() {
                *g += r * x.design(i, j);
            }
        }
        norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if norm < 1e-11 {
            break;
        }
        for (b, g) in beta.iter_mut().zip(&grad) {
            *b += step * g;
        }
    }
    (beta, norm)
}

#[test]
fn binary_weights_match_reference_fit() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 150;
        let p = 1 + (seed % 2) as usize;
        let truth: Vec<f64> = (0..=p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let x = CovariateMatrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let prob = 1.0 / (1.0 + (-x.linear_predictor(i, &truth)).exp());
                if rng.random::<f64>() < prob {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let (reference, norm) = gradient_ascent(&x, &y);
        assert!(
            norm < 1e-11,
            "seed {seed}: reference did not converge ({norm})"
        );
        let fit = logistic::fit_weighted(&x, &y).unwrap();
        assert!(fit.converged);
        for (a, b) in fit.beta.iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-6, "seed {seed}: {a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn newton_steps_never_lower_the_objective(case in logistic_cases()) {
        if let Ok(fit) = logistic::fit_weighted_from(&case.x, &case.w, &case.beta) {
            prop_assert_eq!(fit.objective_trace.len(), fit.iterations + 1);
            for w in fit.objective_trace.windows(2) {
                prop_assert!(
                    w[1] >= w[0] - 1e-12 * (1.0 + w[0].abs()),
                    "objective fell from {} to {}",
                    w[0],
                    w[1]
                );
            }
            let last = *fit.objective_trace.last().unwrap();
            prop_assert_eq!(last, logistic::objective(&case.x, &case.w, &fit.beta));
        }
    }
}
