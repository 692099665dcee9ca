//! Joint blockmodel log-likelihood with plug-in estimates, and the BIC / ICL
//! criteria used to pick the number of communities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::{self, FitOptions, FitResult, Variant};
use crate::error::{Error, Result};
use crate::logistic::softplus;
use crate::network::{edge_block_sums, CovariateMatrix, LabelVector, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct JointLikelihood {
    pub value: f64,
    pub warning: Option<String>,
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Sums in sorted order, so relabelling communities cannot change the
/// rounding.
fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Joint log-likelihood of labels and adjacency with `pi` and the link
/// probabilities replaced by their plug-in estimates from `c_hat`:
///
/// `sum_i {y_i x_i b - log(1 + e^{x_i b})} + sum_k n_k log pi_k
///  + 1/2 sum_{k,l} {O_kl log P_kl + (n_kl - O_kl) log(1 - P_kl)}`
///
/// with `P_kl = O_kl / n_kl` (0 when `n_kl = 0`) and `0 log 0 = 0`.
pub fn joint_log_likelihood(
    net: &Network,
    x: &CovariateMatrix,
    c_hat: &LabelVector,
    beta: &[f64],
) -> Result<JointLikelihood> {
    if x.n() != net.n() {
        return Err(Error::Dimension(format!(
            "network has {} nodes, covariates {} rows",
            net.n(),
            x.n()
        )));
    }
    if beta.len() != x.n_coef() || beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numerical(
            "beta must be finite with one entry per design column".into(),
        ));
    }
    let sums = edge_block_sums(net, c_hat)?;
    let k = c_hat.k();

    let logistic: f64 = (0..net.n())
        .map(|i| {
            let eta = x.linear_predictor(i, beta);
            let y = if c_hat.in_community(i) { eta } else { 0.0 };
            y - softplus(eta)
        })
        .sum();

    let community_total: usize = sums.sizes[..k].iter().sum();
    let mut warning = None;
    let mixing = if community_total == 0 {
        warning = Some("every node is labelled background; community term is empty".to_string());
        0.0
    } else {
        sorted_sum(
            sums.sizes[..k]
                .iter()
                .map(|&nk| xlogy(nk as f64, nk as f64 / community_total as f64))
                .collect(),
        )
    };

    let mut terms = Vec::with_capacity((k + 1) * (k + 1));
    for a in 0..=k {
        for b in 0..=k {
            let o = sums.links(a, b) as f64;
            let pairs = sums.pairs(a, b) as f64;
            let p = if pairs > 0.0 { o / pairs } else { 0.0 };
            terms.push(xlogy(o, p) + xlogy(pairs - o, 1.0 - p));
        }
    }
    let block = sorted_sum(terms);
    Ok(JointLikelihood {
        value: logistic + mixing + 0.5 * block,
        warning,
    })
}

/// [`joint_log_likelihood`] with the background-background block scored by a
/// degree-corrected plug-in instead of one homogeneous rate:
/// `P_ij = min(1, d_i d_j / sum_b d_b)` over background pairs, `d_i` counting
/// background neighbours only. Used to rank robust fits, whose background
/// need not be homogeneous.
pub fn robust_joint_log_likelihood(
    net: &Network,
    x: &CovariateMatrix,
    c_hat: &LabelVector,
    beta: &[f64],
) -> Result<JointLikelihood> {
    let base = joint_log_likelihood(net, x, c_hat, beta)?;
    let k = c_hat.k();
    let sums = edge_block_sums(net, c_hat)?;
    let o = sums.links(k, k) as f64;
    let pairs = sums.pairs(k, k) as f64;
    let p = if pairs > 0.0 { o / pairs } else { 0.0 };
    let homogeneous = 0.5 * (xlogy(o, p) + xlogy(pairs - o, 1.0 - p));

    let background: Vec<usize> = (0..net.n()).filter(|&i| !c_hat.in_community(i)).collect();
    let internal: Vec<f64> = (0..net.n())
        .map(|i| {
            if c_hat.in_community(i) {
                0.0
            } else {
                net.neighbors(i)
                    .iter()
                    .filter(|&&j| !c_hat.in_community(j as usize))
                    .count() as f64
            }
        })
        .collect();
    let total: f64 = internal.iter().sum();
    let mut corrected = 0.0;
    if total > 0.0 {
        let mut linked = vec![false; net.n()];
        for (a, &i) in background.iter().enumerate() {
            for &j in net.neighbors(i) {
                linked[j as usize] = true;
            }
            for &j in &background[a + 1..] {
                let pij = (internal[i] * internal[j] / total).min(1.0);
                corrected += if linked[j] {
                    pij.ln()
                } else {
                    (1.0 - pij).ln()
                };
            }
            for &j in net.neighbors(i) {
                linked[j as usize] = false;
            }
        }
    }
    Ok(JointLikelihood {
        value: base.value - homogeneous + corrected,
        warning: base.warning,
    })
}

/// `((K+1)(K+2)/2) log(n(n-1)/2)`.
pub fn bic_penalty(n: usize, k: usize) -> f64 {
    let dyads = n as f64 * (n as f64 - 1.0) / 2.0;
    ((k + 1) * (k + 2)) as f64 / 2.0 * dyads.ln()
}

pub fn bic_from_loglik(loglik: f64, n: usize, k: usize) -> f64 {
    -2.0 * loglik + bic_penalty(n, k)
}

pub fn icl_from_loglik(loglik: f64, n: usize, k: usize) -> f64 {
    bic_from_loglik(loglik, n, k) + k as f64 * (n as f64).ln()
}

fn fit_loglik(net: &Network, x: &CovariateMatrix, fit: &FitResult, k: usize) -> Result<f64> {
    if fit.c_hat.k() != k {
        return Err(Error::Dimension(format!(
            "fit was computed for K = {}, criterion requested for K = {k}",
            fit.c_hat.k()
        )));
    }
    Ok(joint_log_likelihood(net, x, &fit.c_hat, &fit.params.beta)?.value)
}

pub fn bic(net: &Network, x: &CovariateMatrix, fit: &FitResult, k: usize) -> Result<f64> {
    Ok(bic_from_loglik(fit_loglik(net, x, fit, k)?, net.n(), k))
}

pub fn icl(net: &Network, x: &CovariateMatrix, fit: &FitResult, k: usize) -> Result<f64> {
    Ok(icl_from_loglik(fit_loglik(net, x, fit, k)?, net.n(), k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRecord {
    pub k: usize,
    pub joint_loglik: f64,
    pub bic: f64,
    pub icl: f64,
    pub final_pll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub variant: Variant,
    pub records: Vec<KRecord>,
    pub chosen_k_bic: usize,
    pub chosen_k_icl: usize,
    /// `(K, cause)` for every K whose fit failed.
    pub failures: Vec<(usize, String)>,
    pub note: String,
}

fn argmin_k(records: &[KRecord], key: impl Fn(&KRecord) -> f64) -> usize {
    records
        .iter()
        .fold(None::<&KRecord>, |best, r| match best {
            Some(b) if key(b) <= key(r) => Some(b),
            _ => Some(r),
        })
        .map(|r| r.k)
        .expect("nonempty records")
}

/// Fits every K in `k_range` with the same options and seed, scores each with
/// BIC and ICL, and returns the minimisers (ties go to the smaller K).
pub fn select_k(
    net: &Network,
    x: &CovariateMatrix,
    k_range: &[usize],
    variant: Variant,
    opts: &FitOptions,
) -> Result<SelectionReport> {
    if k_range.is_empty() {
        return Err(Error::Config("empty K range".into()));
    }
    if let Some(&bad) = k_range.iter().find(|&&k| k == 0 || k + 1 >= net.n()) {
        return Err(Error::Config(format!(
            "K = {bad} not usable with n = {}",
            net.n()
        )));
    }
    let mut ks = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();

    let outcomes: Vec<(usize, Result<KRecord>)> = ks
        .par_iter()
        .map(|&k| {
            let rec = em::fit(net, x, k, variant, opts).and_then(|fit| {
                let ll = fit_loglik(net, x, &fit, k)?;
                Ok(KRecord {
                    k,
                    joint_loglik: ll,
                    bic: bic_from_loglik(ll, net.n(), k),
                    icl: icl_from_loglik(ll, net.n(), k),
                    final_pll: fit.final_pll,
                })
            });
            (k, rec)
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (k, r) in outcomes {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push((k, e.to_string())),
        }
    }
    if records.is_empty() {
        return Err(Error::Select(
            failures
                .iter()
                .map(|(k, e)| format!("K = {k}: {e}"))
                .collect(),
        ));
    }
    Ok(SelectionReport {
        variant,
        chosen_k_bic: argmin_k(&records, |r| r.bic),
        chosen_k_icl: argmin_k(&records, |r| r.icl),
        records,
        failures,
        note: "link probabilities, background block included, are plug-in ratios O_kl / n_kl \
               evaluated at the fitted labels"
            .to_string(),
    })
}
