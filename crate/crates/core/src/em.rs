//! Pseudo-likelihood EM fitters.
//!
//! Rows of the block-count matrix `B` are treated as independent draws from a
//! `K + 1` component mixture. The mixing weight of community `l` for node `i`
//! is `sigmoid(x_i b) pi_l`; the background gets `1 - sigmoid(x_i b)`. The
//! component kernels are
//!
//! * Poisson: `exp(-mu_l) prod_k lambda_lk^{b_ik}` over all `K + 1` blocks,
//! * Multinomial: `prod_k theta_lk^{b_ik}` with row-stochastic `theta`,
//! * Robust: the Poisson kernel restricted to the first `K` blocks, so edges
//!   landing in the background block never enter the likelihood.
//!
//! [`fit`] wraps the inner EM in the outer loop that rebuilds `B` from the
//! current hard labels until they stop changing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logistic::{self, log_sigmoid};
use crate::network::{block_counts, BlockCounts, CovariateMatrix, LabelVector, Network};
use crate::{select, spectral};

/// Floor applied to rates before taking logs.
pub const RATE_FLOOR: f64 = 1e-10;
/// Communities whose posterior mass drops below this are considered empty.
pub const MIN_GROUP_MASS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Poisson,
    Multinomial,
    Robust,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Poisson, Variant::Multinomial, Variant::Robust];

    /// Number of block columns entering the kernel.
    pub fn n_cols(self, k: usize) -> usize {
        match self {
            Variant::Robust => k,
            _ => k + 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Poisson => "poisson",
            Variant::Multinomial => "multinomial",
            Variant::Robust => "robust",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(Variant::Poisson),
            "multinomial" => Ok(Variant::Multinomial),
            "robust" => Ok(Variant::Robust),
            other => Err(Error::Config(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub variant: Variant,
    pub beta: Vec<f64>,
    pub pi: Vec<f64>,
    /// Row-major `(K+1) x n_cols`: Poisson rates `lambda`, or multinomial
    /// probabilities `theta`.
    pub rates: Vec<f64>,
    /// Row sums of `rates` (Poisson and robust only; ones for multinomial).
    pub mu: Vec<f64>,
    /// The logistic M-step hit the coefficient cap and `beta` is the capped
    /// estimate.
    pub logistic_capped: bool,
}

impl ModelParams {
    /// Assembles parameters and derives `mu`. `rates` must have
    /// `(K+1) * variant.n_cols(K)` entries.
    pub fn new(variant: Variant, beta: Vec<f64>, pi: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let k = pi.len();
        if k == 0 {
            return Err(Error::Config("pi must have at least one entry".into()));
        }
        let cols = variant.n_cols(k);
        if rates.len() != (k + 1) * cols {
            return Err(Error::Dimension(format!(
                "{variant} rates need {} entries, got {}",
                (k + 1) * cols,
                rates.len()
            )));
        }
        if rates
            .iter()
            .chain(&pi)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::Numerical(
                "rates and pi must be finite and nonnegative".into(),
            ));
        }
        if (pi.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("pi must sum to 1".into()));
        }
        let mu = rates
            .chunks(cols)
            .map(|r| r.iter().sum())
            .collect::<Vec<f64>>();
        if variant == Variant::Multinomial && mu.iter().any(|s| (s - 1.0).abs() > 1e-9) {
            return Err(Error::Config("multinomial rate rows must sum to 1".into()));
        }
        Ok(Self {
            variant,
            beta,
            pi,
            rates,
            mu,
            logistic_capped: false,
        })
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn n_cols(&self) -> usize {
        self.variant.n_cols(self.k())
    }

    pub fn rate(&self, l: usize, k: usize) -> f64 {
        self.rates[l * self.n_cols() + k]
    }
}

/// Row-major `n x (K+1)` posterior matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub n: usize,
    pub n_groups: usize,
    pub values: Vec<f64>,
}

impl Posterior {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_groups..(i + 1) * self.n_groups]
    }

    pub fn get(&self, i: usize, l: usize) -> f64 {
        self.values[i * self.n_groups + l]
    }

    /// Hard assignment per node; ties go to the smaller group index.
    pub fn argmax(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for l in 1..row.len() {
                    if row[l] > row[best] {
                        best = l;
                    }
                }
                best
            })
            .collect()
    }

    pub fn labels(&self) -> LabelVector {
        LabelVector::new(self.argmax(), self.n_groups - 1).expect("argmax in range")
    }

    /// Posterior with all mass on the given labels.
    pub fn one_hot(labels: &LabelVector) -> Self {
        let g = labels.n_groups();
        let mut values = vec![0.0; labels.len() * g];
        for (i, &l) in labels.groups().iter().enumerate() {
            values[i * g + l] = 1.0;
        }
        Self {
            n: labels.len(),
            n_groups: g,
            values,
        }
    }
}

fn check_dims(b: &BlockCounts, x: &CovariateMatrix, params: &ModelParams) -> Result<()> {
    if b.n() != x.n() {
        return Err(Error::Dimension(format!(
            "block counts have {} rows, covariates {}",
            b.n(),
            x.n()
        )));
    }
    if b.k() != params.k() {
        return Err(Error::Dimension(format!(
            "block counts built for K = {}, parameters for K = {}",
            b.k(),
            params.k()
        )));
    }
    if params.beta.len() != x.n_coef() {
        return Err(Error::Dimension(format!(
            "beta has {} entries, design has {} columns",
            params.beta.len(),
            x.n_coef()
        )));
    }
    Ok(())
}

/// Log-space posterior for every node, plus the pseudo-log-likelihood (the
/// sum of the per-node normalisers).
fn posterior_and_pll(
    b: &BlockCounts,
    x: &CovariateMatrix,
    params: &ModelParams,
) -> Result<(Posterior, f64)> {
    check_dims(b, x, params)?;
    let k = params.k();
    let g = k + 1;
    let cols = params.n_cols();
    let log_rates: Vec<f64> = params
        .rates
        .iter()
        .map(|r| r.max(RATE_FLOOR).ln())
        .collect();
    let log_pi: Vec<f64> = params.pi.iter().map(|p| p.ln()).collect();
    let with_mu = params.variant != Variant::Multinomial;

    let mut values = vec![0.0; b.n() * g];
    let mut pll = 0.0;
    let mut lw = vec![0.0; g];
    for i in 0..b.n() {
        let counts = &b.row(i)[..cols];
        let eta = x.linear_predictor(i, &params.beta);
        let log_in = log_sigmoid(eta);
        let log_out = log_in - eta;
        for (l, slot) in lw.iter_mut().enumerate() {
            let lr = &log_rates[l * cols..(l + 1) * cols];
            let mut kernel = if with_mu { -params.mu[l] } else { 0.0 };
            for (&c, &r) in counts.iter().zip(lr) {
                if c > 0 {
                    kernel += c as f64 * r;
                }
            }
            let prior = if l < k { log_in + log_pi[l] } else { log_out };
            *slot = prior + kernel;
        }
        let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numerical(format!(
                "node {i} has zero posterior mass"
            )));
        }
        let row = &mut values[i * g..(i + 1) * g];
        let mut total = 0.0;
        for (z, &w) in row.iter_mut().zip(&lw) {
            *z = (w - max).exp();
            total += *z;
        }
        for z in row.iter_mut() {
            *z /= total;
        }
        pll += max + total.ln();
    }
    if !pll.is_finite() {
        return Err(Error::Numerical(
            "pseudo-log-likelihood is not finite".into(),
        ));
    }
    Ok((
        Posterior {
            n: b.n(),
            n_groups: g,
            values,
        },
        pll,
    ))
}

pub fn e_step(b: &BlockCounts, x: &CovariateMatrix, params: &ModelParams) -> Result<Posterior> {
    posterior_and_pll(b, x, params).map(|(z, _)| z)
}

/// Marginal pseudo-log-likelihood of `B` under the variant, up to the
/// constants the kernels omit (`b_ik!` terms, multinomial coefficients).
pub fn pseudo_log_likelihood(
    b: &BlockCounts,
    x: &CovariateMatrix,
    params: &ModelParams,
) -> Result<f64> {
    posterior_and_pll(b, x, params).map(|(_, pll)| pll)
}

/// Closed-form updates for `pi` and the rates, and a weighted logistic fit
/// for `beta`.
pub fn m_step(
    variant: Variant,
    z: &Posterior,
    b: &BlockCounts,
    x: &CovariateMatrix,
) -> Result<ModelParams> {
    m_step_from(variant, z, b, x, None)
}

/// [`m_step`] with the Newton iterations for `beta` started at `beta_init`
/// instead of zero. Under separation the capped estimate is used unless the
/// start has the higher logistic objective, in which case `beta` stays put.
pub fn m_step_from(
    variant: Variant,
    z: &Posterior,
    b: &BlockCounts,
    x: &CovariateMatrix,
    beta_init: Option<&[f64]>,
) -> Result<ModelParams> {
    if z.n != b.n() || z.n != x.n() || z.n_groups != b.n_blocks() {
        return Err(Error::Dimension(format!(
            "posterior {}x{}, block counts {}x{}, covariates {} rows",
            z.n,
            z.n_groups,
            b.n(),
            b.n_blocks(),
            x.n()
        )));
    }
    let g = z.n_groups;
    let k = g - 1;
    let cols = variant.n_cols(k);

    let mut mass = vec![0.0; g];
    let mut weighted = vec![0.0; g * cols];
    let mut degree_mass = vec![0.0; g];
    for i in 0..z.n {
        let counts = b.row(i);
        let d = b.degree(i) as f64;
        for (l, &zil) in z.row(i).iter().enumerate() {
            if zil == 0.0 {
                continue;
            }
            mass[l] += zil;
            degree_mass[l] += zil * d;
            let acc = &mut weighted[l * cols..(l + 1) * cols];
            for (a, &c) in acc.iter_mut().zip(&counts[..cols]) {
                *a += zil * c as f64;
            }
        }
    }
    for (l, &m) in mass.iter().enumerate() {
        let threshold = if l < k {
            MIN_GROUP_MASS
        } else {
            f64::MIN_POSITIVE
        };
        if m.is_nan() || m < threshold {
            return Err(Error::EmptyGroup {
                group: l + 1,
                mass: m,
            });
        }
    }
    let community_mass: f64 = mass[..k].iter().sum();
    let pi: Vec<f64> = mass[..k].iter().map(|m| m / community_mass).collect();

    let mut rates = weighted;
    match variant {
        Variant::Poisson | Variant::Robust => {
            for l in 0..g {
                for r in &mut rates[l * cols..(l + 1) * cols] {
                    *r = (*r / mass[l]).max(RATE_FLOOR);
                }
            }
        }
        Variant::Multinomial => {
            for l in 0..g {
                if degree_mass[l].is_nan() || degree_mass[l] <= 0.0 {
                    return Err(Error::DegenerateDegree { group: l + 1 });
                }
                let row = &mut rates[l * cols..(l + 1) * cols];
                for r in row.iter_mut() {
                    *r /= degree_mass[l];
                }
                // exact renormalisation against accumulated rounding
                let s: f64 = row.iter().sum();
                for r in row.iter_mut() {
                    *r /= s;
                }
            }
        }
    }

    let w: Vec<f64> = (0..z.n)
        .map(|i| z.row(i)[..k].iter().sum::<f64>().clamp(0.0, 1.0))
        .collect();
    let zero = vec![0.0; x.n_coef()];
    let init = beta_init.filter(|b| b.len() == zero.len()).unwrap_or(&zero);
    let (beta, capped) = match logistic::fit_weighted_from(x, &w, init) {
        Ok(fit) => (fit.beta, false),
        Err(Error::Separation { capped, .. }) => {
            // never step below the start, so EM keeps ascending
            if logistic::objective(x, &w, init) > logistic::objective(x, &w, &capped) {
                (init.to_vec(), true)
            } else {
                (capped, true)
            }
        }
        Err(e) => return Err(e),
    };
    let mut params = ModelParams::new(variant, beta, pi, rates)?;
    params.logistic_capped = capped;
    Ok(params)
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub params: ModelParams,
    pub z: Posterior,
    /// Pseudo-log-likelihood at the initial parameters and after every
    /// M-step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub logistic_capped: bool,
}

/// Alternates E- and M-steps from `init` until the pseudo-log-likelihood
/// improves by less than `tol`, or `max_iter` M-steps have run.
pub fn inner_em(
    b: &BlockCounts,
    x: &CovariateMatrix,
    init: ModelParams,
    tol: f64,
    max_iter: usize,
) -> Result<InnerResult> {
    let variant = init.variant;
    let mut params = init;
    let (mut z, mut pll) = posterior_and_pll(b, x, &params)?;
    let mut trace = vec![pll];
    let mut capped = params.logistic_capped;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let next = m_step_from(variant, &z, b, x, Some(&params.beta))?;
        capped |= next.logistic_capped;
        let (next_z, next_pll) = posterior_and_pll(b, x, &next)?;
        trace.push(next_pll);
        let gain = next_pll - pll;
        params = next;
        z = next_z;
        pll = next_pll;
        if gain < tol {
            break;
        }
    }
    Ok(InnerResult {
        params,
        z,
        trace,
        iterations,
        logistic_capped: capped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Random restarts, in addition to the deterministic starts.
    pub restarts: usize,
    /// Adds `K+1` spectral starts, one per choice of background cluster.
    pub spectral_starts: bool,
    pub seed: u64,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            spectral_starts: true,
            seed: 0,
            inner_tol: 1e-6,
            max_inner: 200,
            max_outer: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub z: Posterior,
    pub c_hat: LabelVector,
    pub e_final: LabelVector,
    pub params: ModelParams,
    /// One trace per inner EM run of the winning restart.
    pub pll_trace: Vec<Vec<f64>>,
    pub final_pll: f64,
    /// Joint log-likelihood of the returned labels.
    pub joint_loglik: f64,
    /// Restart ranking key, see [`fit`].
    pub score: f64,
    pub outer_iterations: usize,
    /// Position in the start list of [`start_labels`].
    pub restart_index: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Deterministic start: nodes sorted by decreasing degree and cut into `K+1`
/// equal slices; the lowest-degree slice is the background.
pub fn degree_split(net: &Network, k: usize) -> LabelVector {
    let n = net.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| net.degree(b).cmp(&net.degree(a)).then(a.cmp(&b)));
    let mut groups = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        groups[i] = rank * (k + 1) / n;
    }
    LabelVector::new(groups, k).expect("quantile groups in range")
}

/// Uniform random blocking vector from the restart's own stream.
pub fn random_blocking(n: usize, k: usize, seed: u64, restart: usize) -> LabelVector {
    let mut rng = restart_rng(seed, restart);
    let groups = (0..n).map(|_| rng.random_range(0..=k)).collect();
    LabelVector::new(groups, k).expect("random groups in range")
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Best outer iterate seen so far within one restart.
struct Iterate {
    rank: (bool, f64),
    joint: f64,
    inner: InnerResult,
    /// Blocking vector the inner run used.
    e: LabelVector,
    outer: usize,
}

/// Covariate-guided starts: for every covariate column and both signs, the
/// nodes on the upper half of the signed column are split spectrally into
/// `K` communities and the rest form the background.
pub fn covariate_starts(
    net: &Network,
    x: &CovariateMatrix,
    k: usize,
    seed: u64,
) -> Vec<LabelVector> {
    let n = net.n();
    let mut starts = Vec::new();
    for j in 0..x.p() {
        for sign in [1.0, -1.0] {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                (sign * x.row(b)[j])
                    .total_cmp(&(sign * x.row(a)[j]))
                    .then(a.cmp(&b))
            });
            let members = &order[..n / 2];
            let part = spectral::spectral_partition_subset(net, members, k, seed);
            let mut groups = vec![k; n];
            for (&i, &c) in members.iter().zip(&part) {
                groups[i] = c;
            }
            starts.push(LabelVector::new(groups, k).expect("covariate groups in range"));
        }
    }
    starts
}

/// Starting blocking vectors in restart order: the degree split, then (when
/// enabled) the spectral partition once with each of its `K+1` clusters as
/// the background followed by the [`covariate_starts`], then `opts.restarts`
/// random blockings. Random start `r` uses stream `r` of `opts.seed`.
pub fn start_labels(
    net: &Network,
    x: &CovariateMatrix,
    k: usize,
    opts: &FitOptions,
) -> Vec<LabelVector> {
    let mut starts = vec![degree_split(net, k)];
    if opts.spectral_starts {
        let part = spectral::spectral_partition(net, k + 1, opts.seed);
        for bg in (0..=k).rev() {
            let groups = part
                .iter()
                .map(|&c| {
                    if c == bg {
                        k
                    } else if c == k {
                        bg
                    } else {
                        c
                    }
                })
                .collect();
            starts.push(LabelVector::new(groups, k).expect("spectral groups in range"));
        }
        starts.extend(covariate_starts(net, x, k, opts.seed));
    }
    for r in 1..=opts.restarts {
        starts.push(random_blocking(net.n(), k, opts.seed, r));
    }
    starts
}

fn run_restart(
    net: &Network,
    x: &CovariateMatrix,
    variant: Variant,
    opts: &FitOptions,
    restart: usize,
    start: LabelVector,
) -> Result<FitResult> {
    let mut e = start;
    let mut z_prev = Posterior::one_hot(&e);
    let mut traces = Vec::new();
    let mut warnings = Vec::new();
    let mut best: Option<Iterate> = None;
    let mut converged = false;
    let mut cycled = false;
    let mut visited: Vec<LabelVector> = Vec::new();

    for outer in 1..=opts.max_outer {
        let b = block_counts(net, &e)?;
        let init = m_step(variant, &z_prev, &b, x)?;
        let inner = inner_em(&b, x, init, opts.inner_tol, opts.max_inner)?;
        if inner.logistic_capped && !warnings.iter().any(|w: &String| w.starts_with("logistic")) {
            warnings.push("logistic M-step hit the coefficient cap (separation)".to_string());
        }
        if inner.iterations >= opts.max_inner {
            warnings.push(format!("inner EM hit max_inner at outer iteration {outer}"));
        }
        traces.push(inner.trace.clone());
        let next = inner.z.labels();
        let joint = select::joint_log_likelihood(net, x, &next, &inner.params.beta)?.value;
        let score = match variant {
            Variant::Robust => {
                select::robust_joint_log_likelihood(net, x, &next, &inner.params.beta)?.value
            }
            Variant::Poisson | Variant::Multinomial => joint,
        };
        let rank = (all_communities_used(&next), score);
        let stable = next == e;
        if best.as_ref().is_none_or(|b| rank > b.rank) || stable {
            best = Some(Iterate {
                rank,
                joint,
                inner: inner.clone(),
                e: e.clone(),
                outer,
            });
        }
        if stable {
            converged = true;
            break;
        }
        if visited.contains(&next) {
            cycled = true;
            break;
        }
        visited.push(std::mem::replace(&mut e, next));
        z_prev = inner.z;
    }
    if cycled {
        warnings.push("blocking vector cycles; returning best iterate".to_string());
    } else if !converged {
        warnings.push(format!(
            "blocking vector still changing after {} outer iterations; returning best iterate",
            opts.max_outer
        ));
    }
    let best = best.expect("at least one outer iteration");
    let inner = best.inner;
    let final_pll = *inner.trace.last().expect("nonempty trace");
    Ok(FitResult {
        c_hat: inner.z.labels(),
        joint_loglik: best.joint,
        score: best.rank.1,
        z: inner.z,
        e_final: best.e,
        params: inner.params,
        pll_trace: traces,
        final_pll,
        outer_iterations: best.outer,
        restart_index: restart,
        converged,
        warnings,
    })
}

fn all_communities_used(labels: &LabelVector) -> bool {
    labels.sizes()[..labels.k()].iter().all(|&s| s > 0)
}

fn ranking(result: &FitResult) -> (bool, f64) {
    (all_communities_used(&result.c_hat), result.score)
}

/// Outer iterations from a single given blocking vector.
pub fn fit_from(
    net: &Network,
    x: &CovariateMatrix,
    variant: Variant,
    opts: &FitOptions,
    start: LabelVector,
) -> Result<FitResult> {
    if start.len() != net.n() || x.n() != net.n() {
        return Err(Error::Dimension(format!(
            "network has {} nodes, start {} labels, covariates {} rows",
            net.n(),
            start.len(),
            x.n()
        )));
    }
    run_restart(net, x, variant, opts, 0, start)
}

/// Full fit: several starts, each iterating inner EM and re-blocking until the
/// blocking vector is stable.
///
/// Starts (and, within a start, outer iterates) whose labels leave no
/// community empty rank first; ties are broken by `score`, the joint
/// log-likelihood of the labels for the Poisson and multinomial variants and
/// [`select::robust_joint_log_likelihood`] for the robust variant. Remaining
/// ties go to the lower restart index.
pub fn fit(
    net: &Network,
    x: &CovariateMatrix,
    k: usize,
    variant: Variant,
    opts: &FitOptions,
) -> Result<FitResult> {
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    if net.n() != x.n() {
        return Err(Error::Dimension(format!(
            "network has {} nodes, covariates {} rows",
            net.n(),
            x.n()
        )));
    }
    if net.n() <= k + 1 {
        return Err(Error::Config(format!(
            "n = {} too small for K = {k}",
            net.n()
        )));
    }
    if opts.max_outer == 0 {
        return Err(Error::Config("max_outer must be positive".into()));
    }
    let starts = start_labels(net, x, k, opts);
    let n_starts = starts.len();
    let outcomes: Vec<Result<FitResult>> = starts
        .into_par_iter()
        .enumerate()
        .map(|(r, start)| run_restart(net, x, variant, opts, r, start))
        .collect();

    let mut best: Option<FitResult> = None;
    let mut causes = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(result) => {
                if best.as_ref().is_none_or(|b| ranking(&result) > ranking(b)) {
                    best = Some(result);
                }
            }
            Err(e) => causes.push(format!("restart {r}: {e}")),
        }
    }
    match best {
        Some(mut result) => {
            if !all_communities_used(&result.c_hat) {
                result
                    .warnings
                    .push("every start left at least one community empty".to_string());
            }
            result
                .warnings
                .extend(causes.into_iter().map(|c| format!("abandoned {c}")));
            Ok(result)
        }
        None => Err(Error::Fit {
            restarts: n_starts,
            causes,
        }),
    }
}
