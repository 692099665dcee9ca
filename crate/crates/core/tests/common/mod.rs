//! Shared strategies, oracles and property checks for the integration tests
//! and the acceptance runner.

#![allow(dead_code)]

use lrcd::em::{self, ModelParams, Posterior, Variant};
use lrcd::{
    block_counts, logistic, metrics, BlockCounts, CovariateMatrix, Error, LabelVector, Network,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twofloat::TwoFloat;

pub type CheckResult = Result<(), TestCaseError>;

/// Small random network with covariates and a blocking vector that uses
/// every group.
#[derive(Debug, Clone)]
pub struct Instance {
    pub net: Network,
    /// The pairs `net` was built from.
    pub edges: Vec<(usize, usize)>,
    pub x: CovariateMatrix,
    pub e: LabelVector,
    pub k: usize,
    pub seed: u64,
}

pub fn build_instance(n: usize, k: usize, density: f64, p: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                edges.push((i, j));
            }
        }
    }
    let groups: Vec<usize> = (0..n)
        .map(|i| if i <= k { i } else { rng.random_range(0..=k) })
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let x = if p == 0 {
        CovariateMatrix::intercept_only(n)
    } else {
        CovariateMatrix::from_rows(&rows).unwrap()
    };
    Instance {
        net: Network::from_edges(n, &edges).unwrap(),
        edges,
        x,
        e: LabelVector::new(groups, k).unwrap(),
        k,
        seed,
    }
}

pub fn instances(n_max: usize, k_max: usize) -> impl Strategy<Value = Instance> {
    (1..=k_max, 0.05f64..0.6, 0usize..=2, any::<u64>())
        .prop_flat_map(move |(k, d, p, s)| ((k + 2)..=n_max.max(k + 2), Just((k, d, p, s))))
        .prop_map(|(n, (k, d, p, s))| build_instance(n, k, d, p, s))
}

/// Random parameters for `variant` with `k` communities; rates in
/// `[0.05, 3]`, multinomial rows normalised.
pub fn random_params(variant: Variant, k: usize, p: usize, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let beta: Vec<f64> = (0..=p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut pi: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let drift: f64 = pi.iter().sum::<f64>() - 1.0;
    pi[0] -= drift;
    let cols = variant.n_cols(k);
    let mut rates: Vec<f64> = (0..(k + 1) * cols)
        .map(|_| rng.random_range(0.05..3.0))
        .collect();
    if variant == Variant::Multinomial {
        for row in rates.chunks_mut(cols) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|r| *r /= s);
        }
    }
    ModelParams::new(variant, beta, pi, rates).unwrap()
}

// ---- oracles ----

pub fn dense_block_counts(n: usize, edges: &[(usize, usize)], e: &LabelVector) -> Vec<Vec<u32>> {
    let mut a = vec![vec![false; n]; n];
    for &(i, j) in edges {
        a[i][j] = true;
        a[j][i] = true;
    }
    (0..n)
        .map(|i| {
            (0..e.n_groups())
                .map(|k| (0..n).filter(|&j| a[i][j] && e.get(j) == k).count() as u32)
                .collect()
        })
        .collect()
}

fn tf(v: f64) -> TwoFloat {
    TwoFloat::from(v)
}

fn tf_factorial(m: u32) -> TwoFloat {
    (1..=m).fold(tf(1.0), |acc, v| acc * tf(f64::from(v)))
}

/// Posterior and pseudo-log-likelihood from the product form of the
/// mixture, `prior_l * prod_k pmf(b_ik | rate_lk)`, in double-double
/// arithmetic. The pll keeps the factorial terms, so the fitted value must be
/// shifted by them before comparison.
pub fn e_step_oracle(
    b: &BlockCounts,
    x: &CovariateMatrix,
    params: &ModelParams,
) -> (Vec<Vec<f64>>, f64) {
    let k = params.k();
    let cols = params.n_cols();
    let mut z = Vec::new();
    let mut pll = tf(0.0);
    for i in 0..b.n() {
        let eta = tf(x.linear_predictor(i, &params.beta));
        let p_in = tf(1.0) / (tf(1.0) + (-eta).exp());
        let weights: Vec<TwoFloat> = (0..=k)
            .map(|l| {
                let prior = if l < k {
                    p_in * tf(params.pi[l])
                } else {
                    tf(1.0) - p_in
                };
                let mut w = prior;
                for c in 0..cols {
                    let count = b.get(i, c);
                    let rate = tf(params.rate(l, c).max(em::RATE_FLOOR));
                    w *= (0..count).fold(tf(1.0), |acc, _| acc * rate);
                    w /= tf_factorial(count);
                    if params.variant != Variant::Multinomial {
                        w *= (-rate).exp();
                    }
                }
                if params.variant == Variant::Multinomial {
                    let used: u32 = (0..cols).map(|c| b.get(i, c)).sum();
                    w *= tf_factorial(used);
                }
                w
            })
            .collect();
        let total = weights.iter().fold(tf(0.0), |acc, &w| acc + w);
        pll += total.ln();
        z.push(weights.iter().map(|&w| f64::from(w / total)).collect());
    }
    (z, f64::from(pll))
}

/// Log-terms the fitted pseudo-log-likelihood omits relative to
/// [`e_step_oracle`].
pub fn dropped_constants(b: &BlockCounts, variant: Variant, k: usize) -> f64 {
    let cols = variant.n_cols(k);
    let lf = |m: u32| (1..=m).map(|v| f64::from(v).ln()).sum::<f64>();
    (0..b.n())
        .map(|i| {
            let per: f64 = (0..cols).map(|c| lf(b.get(i, c))).sum();
            match variant {
                Variant::Multinomial => per - lf((0..cols).map(|c| b.get(i, c)).sum()),
                _ => per,
            }
        })
        .sum()
}

/// ARI from the four pair counts.
pub fn ari_pairs(a: &[usize], b: &[usize]) -> f64 {
    let (mut ss, mut sd, mut ds, mut dd) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => ss += 1.0,
                (true, false) => sd += 1.0,
                (false, true) => ds += 1.0,
                (false, false) => dd += 1.0,
            }
        }
    }
    let denom = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
    if denom == 0.0 {
        return 1.0;
    }
    2.0 * (ss * dd - sd * ds) / denom
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(k - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

pub fn misclassification_brute(c_hat: &[usize], c_true: &[usize], k_total: usize) -> f64 {
    permutations(k_total)
        .iter()
        .map(|phi| {
            c_hat
                .iter()
                .zip(c_true)
                .filter(|(&h, &t)| h != phi[t])
                .count()
        })
        .min()
        .unwrap() as f64
        / c_hat.len() as f64
}

// ---- property checks ----

pub fn check_block_counts(inst: &Instance) -> CheckResult {
    let b = block_counts(&inst.net, &inst.e).unwrap();
    let dense = dense_block_counts(inst.net.n(), &inst.edges, &inst.e);
    for (i, row) in dense.iter().enumerate() {
        prop_assert_eq!(b.row(i), row.as_slice(), "node {}", i);
        prop_assert_eq!(b.degree(i), row.iter().sum::<u32>());
    }
    Ok(())
}

fn is_degenerate(e: &Error) -> bool {
    matches!(e, Error::EmptyGroup { .. } | Error::DegenerateDegree { .. })
}

pub fn check_row_sums(z: &Posterior) -> CheckResult {
    for i in 0..z.n {
        let s: f64 = z.row(i).iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-10, "row {} sums to {}", i, s);
        prop_assert!(z.row(i).iter().all(|v| (0.0..=1.0).contains(v)));
    }
    Ok(())
}

/// Inner EM from the M-step of the blocking vector: the trace never drops by
/// more than 1e-8 and every posterior row sums to one. Instances where a group
/// loses all its mass are rejected.
pub fn check_ascent(inst: &Instance, variant: Variant) -> CheckResult {
    let b = block_counts(&inst.net, &inst.e).unwrap();
    let init = match em::m_step(variant, &Posterior::one_hot(&inst.e), &b, &inst.x) {
        Ok(p) => p,
        Err(e) if is_degenerate(&e) => return Err(TestCaseError::reject("degenerate start")),
        Err(e) => return Err(TestCaseError::fail(e.to_string())),
    };
    let run = match em::inner_em(&b, &inst.x, init, 0.0, 40) {
        Ok(r) => r,
        Err(e) if is_degenerate(&e) => return Err(TestCaseError::reject("group emptied")),
        Err(e) => return Err(TestCaseError::fail(e.to_string())),
    };
    for w in run.trace.windows(2) {
        prop_assert!(
            w[1] >= w[0] - 1e-8,
            "pll fell from {} to {} (capped {})",
            w[0],
            w[1],
            run.logistic_capped
        );
    }
    check_row_sums(&run.z)?;
    let labels = run.z.argmax();
    for (i, &label) in labels.iter().enumerate() {
        let row = run.z.row(i);
        let first_max = row
            .iter()
            .position(|&v| v == row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .unwrap();
        prop_assert_eq!(label, first_max);
    }
    Ok(())
}

/// Flips every background-background pair of `inst` (under `e`) with
/// probability one half.
pub fn rewire_background(inst: &Instance) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(inst.seed.wrapping_add(17));
    let bg = inst.k;
    let n = inst.net.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let both_bg = inst.e.get(i) == bg && inst.e.get(j) == bg;
            let present = inst.net.has_edge(i, j);
            let keep = if both_bg {
                rng.random::<bool>()
            } else {
                present
            };
            if keep {
                edges.push((i, j));
            }
        }
    }
    Network::from_edges(n, &edges).unwrap()
}

/// Robust E-step, pll and M-step are bitwise unchanged when edges inside the
/// background are rewired.
pub fn check_robust_invariance(inst: &Instance) -> CheckResult {
    let params = random_params(Variant::Robust, inst.k, inst.x.p(), inst.seed);
    let other = rewire_background(inst);
    let b1 = block_counts(&inst.net, &inst.e).unwrap();
    let b2 = block_counts(&other, &inst.e).unwrap();
    let z1 = em::e_step(&b1, &inst.x, &params).unwrap();
    let z2 = em::e_step(&b2, &inst.x, &params).unwrap();
    prop_assert_eq!(&z1.values, &z2.values);
    let p1 = em::pseudo_log_likelihood(&b1, &inst.x, &params).unwrap();
    let p2 = em::pseudo_log_likelihood(&b2, &inst.x, &params).unwrap();
    prop_assert_eq!(p1.to_bits(), p2.to_bits());
    let m1 = em::m_step(Variant::Robust, &z1, &b1, &inst.x);
    let m2 = em::m_step(Variant::Robust, &z2, &b2, &inst.x);
    prop_assert_eq!(m1, m2);
    Ok(())
}

pub fn check_e_step_oracle(inst: &Instance, variant: Variant) -> CheckResult {
    let params = random_params(variant, inst.k, inst.x.p(), inst.seed);
    let b = block_counts(&inst.net, &inst.e).unwrap();
    let z = em::e_step(&b, &inst.x, &params).unwrap();
    let pll = em::pseudo_log_likelihood(&b, &inst.x, &params).unwrap();
    let (oracle, oracle_pll) = e_step_oracle(&b, &inst.x, &params);
    for (i, row) in oracle.iter().enumerate() {
        for (l, &o) in row.iter().enumerate() {
            prop_assert!(
                (z.get(i, l) - o).abs() <= 1e-9,
                "z[{}][{}] {} vs {}",
                i,
                l,
                z.get(i, l),
                o
            );
        }
    }
    let shifted = pll - dropped_constants(&b, variant, inst.k);
    prop_assert!(
        (shifted - oracle_pll).abs() <= 1e-9 * (1.0 + oracle_pll.abs()),
        "pll {} vs {}",
        shifted,
        oracle_pll
    );
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LogisticCase {
    pub x: CovariateMatrix,
    pub w: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn logistic_cases() -> impl Strategy<Value = LogisticCase> {
    (5usize..40, 0usize..=3, any::<u64>()).prop_map(|(n, p, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let x = if p == 0 {
            CovariateMatrix::intercept_only(n)
        } else {
            CovariateMatrix::from_rows(&rows).unwrap()
        };
        let w = (0..n).map(|_| rng.random::<f64>()).collect();
        let beta = (0..=p).map(|_| rng.random_range(-2.0..2.0)).collect();
        LogisticCase { x, w, beta }
    })
}

/// Analytic gradient against central differences, relative error 1e-5
/// (floored at unit scale), at a random point and at the fitted optimum.
pub fn check_logistic_gradient(case: &LogisticCase) -> CheckResult {
    let mut points = vec![case.beta.clone()];
    if let Ok(fit) = logistic::fit_weighted(&case.x, &case.w) {
        if fit.converged {
            prop_assert!(fit.final_gradient_norm < logistic::GRADIENT_TOL);
            points.push(fit.beta);
        }
    }
    for beta in points {
        let g = logistic::gradient(&case.x, &case.w, &beta);
        for j in 0..beta.len() {
            let h = 1e-5 * beta[j].abs().max(1.0);
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (logistic::objective(&case.x, &case.w, &up)
                - logistic::objective(&case.x, &case.w, &down))
                / (2.0 * h);
            let rel = (g[j] - fd).abs() / g[j].abs().max(1.0);
            prop_assert!(rel <= 1e-5, "coef {}: analytic {} vs fd {}", j, g[j], fd);
        }
    }
    Ok(())
}

pub fn partitions() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, usize)> {
    (2usize..=10, 1usize..=4).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec(0..k, n),
            prop::collection::vec(0..k, n),
            Just(k),
        )
    })
}

pub fn check_partition_metrics(a: &[usize], b: &[usize], k: usize) -> CheckResult {
    let ari = metrics::adjusted_rand_index(a, b).unwrap();
    let oracle = ari_pairs(a, b);
    prop_assert!((ari - oracle).abs() <= 1e-12, "ari {} vs {}", ari, oracle);
    let m = metrics::misclassification_rate(a, b, k).unwrap();
    let brute = misclassification_brute(a, b, k);
    prop_assert!((m - brute).abs() <= 1e-15, "rate {} vs {}", m, brute);
    Ok(())
}

// ---- runner for the acceptance suite ----

/// Runs `check` on `cases` deterministic draws from `strategy`.
pub fn run_property<S: Strategy>(
    cases: u32,
    strategy: S,
    check: impl Fn(S::Value) -> CheckResult,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases,
        max_global_rejects: cases * 20,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, check).map_err(|e| match e {
        TestError::Abort(why) => format!("aborted: {why}"),
        TestError::Fail(why, value) => format!("{why} (minimal input {value:?})"),
    })
}
