//! Synthetic networks from the covariate-augmented blockmodel.
//!
//! Each node draws covariates, then a community indicator from the logistic
//! model, then a community from `pi` (or the background). Edges are
//! independent Bernoulli draws per unordered pair. In heterogeneous mode every
//! background node carries an intensity `u_i ~ U(0, u_max)` and links to other
//! background nodes with probability `sqrt(u_i u_j)`. Its links to community
//! nodes keep the blockmodel probability unless `u_links_communities` is set,
//! in which case they have probability `u_i` too.
//!
//! Randomness comes from ChaCha8 seeded with `seed` on stream `stream`, so a
//! replicate is fully determined by `(seed, stream)` on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logistic::sigmoid;
use crate::network::{CovariateMatrix, LabelVector, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackgroundMode {
    Homogeneous,
    Heterogeneous {
        u_max: f64,
        #[serde(default)]
        u_links_communities: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CovariateDist {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Default for CovariateDist {
    fn default() -> Self {
        CovariateDist::Uniform { lo: -1.0, hi: 1.0 }
    }
}

impl CovariateDist {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            CovariateDist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            CovariateDist::Normal { mean, sd } => {
                Normal::new(mean, sd).expect("validated sd").sample(rng)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n: usize,
    pub k: usize,
    /// Intercept first; one further entry per covariate.
    pub beta: Vec<f64>,
    pub pi: Vec<f64>,
    /// Row-major symmetric `(K+1) x (K+1)` link probabilities. Background rows
    /// are ignored in heterogeneous mode.
    pub link_probs: Vec<f64>,
    pub background: BackgroundMode,
    pub covariates: Vec<CovariateDist>,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl GenConfig {
    pub fn link_prob(&self, a: usize, b: usize) -> f64 {
        self.link_probs[a * (self.k + 1) + b]
    }

    /// Same design on another replicate stream.
    pub fn with_stream(&self, stream: u64) -> Self {
        Self {
            stream,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        if self.n < 2 {
            return bad("need at least two nodes".into());
        }
        if self.pi.len() != self.k {
            return bad(format!(
                "pi has {} entries for K = {}",
                self.pi.len(),
                self.k
            ));
        }
        if self.pi.iter().any(|p| !(p.is_finite() && *p >= 0.0))
            || (self.pi.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad("pi must be nonnegative and sum to 1".into());
        }
        if self.beta.len() != self.covariates.len() + 1 {
            return bad(format!(
                "beta has {} entries for {} covariates plus intercept",
                self.beta.len(),
                self.covariates.len()
            ));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return bad("beta must be finite".into());
        }
        let g = self.k + 1;
        if self.link_probs.len() != g * g {
            return bad(format!("link matrix needs {} entries", g * g));
        }
        if self.link_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("link probabilities must lie in [0, 1]".into());
        }
        for a in 0..g {
            for b in 0..a {
                if self.link_prob(a, b) != self.link_prob(b, a) {
                    return bad(format!(
                        "link matrix not symmetric at ({}, {})",
                        a + 1,
                        b + 1
                    ));
                }
            }
        }
        if let BackgroundMode::Heterogeneous { u_max, .. } = self.background {
            if !(u_max > 0.0 && u_max <= 1.0) {
                return bad(format!("u_max = {u_max} outside (0, 1]"));
            }
        }
        for c in &self.covariates {
            match *c {
                CovariateDist::Uniform { lo, hi }
                    if !(lo.is_finite() && hi.is_finite() && lo <= hi) =>
                {
                    return bad("uniform covariate needs finite lo <= hi".into())
                }
                CovariateDist::Normal { mean, sd }
                    if !(mean.is_finite() && sd.is_finite() && sd >= 0.0) =>
                {
                    return bad("normal covariate needs finite mean and sd >= 0".into())
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticNetwork {
    pub net: Network,
    pub x: CovariateMatrix,
    pub c_true: LabelVector,
    /// Background intensities (zero for community nodes); heterogeneous mode
    /// only.
    pub u: Option<Vec<f64>>,
}

/// Generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent sub-seed for `index` within `domain`, derived from `master`.
pub fn derive_seed(master: u64, domain: u32, index: u32) -> u64 {
    stream_rng(master, (u64::from(domain) << 32) | u64::from(index)).next_u64()
}

pub fn generate(config: &GenConfig) -> Result<SyntheticNetwork> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, config.stream);
    let (n, k) = (config.n, config.k);
    let p = config.covariates.len();

    let mut values = Vec::with_capacity(n * p);
    let mut groups = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = config
            .covariates
            .iter()
            .map(|d| d.sample(&mut rng))
            .collect();
        let eta = config.beta[0]
            + row
                .iter()
                .zip(&config.beta[1..])
                .map(|(x, b)| x * b)
                .sum::<f64>();
        values.extend_from_slice(&row);
        let group = if rng.random::<f64>() < sigmoid(eta) {
            let draw = rng.random::<f64>();
            let mut acc = 0.0;
            let mut chosen = k - 1;
            for (l, &pl) in config.pi.iter().enumerate() {
                acc += pl;
                if draw < acc {
                    chosen = l;
                    break;
                }
            }
            chosen
        } else {
            k
        };
        groups.push(group);
    }

    let (u, u_links_communities) = match config.background {
        BackgroundMode::Homogeneous => (None, false),
        BackgroundMode::Heterogeneous {
            u_max,
            u_links_communities,
        } => (
            Some(
                groups
                    .iter()
                    .map(|&g| {
                        if g == k {
                            u_max * rng.random::<f64>()
                        } else {
                            0.0
                        }
                    })
                    .collect::<Vec<f64>>(),
            ),
            u_links_communities,
        ),
    };

    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (gi, gj) = (groups[i], groups[j]);
            let prob = match &u {
                Some(u) if gi == k && gj == k => (u[i] * u[j]).sqrt(),
                Some(u) if gi == k && u_links_communities => u[i],
                Some(u) if gj == k && u_links_communities => u[j],
                _ => config.link_prob(gi, gj),
            };
            if rng.random::<f64>() < prob {
                edges.push((i, j));
            }
        }
    }

    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Ok(SyntheticNetwork {
        net: Network::from_edges(n, &edges)?,
        x: CovariateMatrix::new(n, names, values)?,
        c_true: LabelVector::new(groups, k)?,
        u,
    })
}

/// Between-community link probability in the simulation designs.
pub const BETWEEN_PROB: f64 = 0.05;
/// Link probability for every background-involving pair (homogeneous mode).
pub const BACKGROUND_PROB: f64 = 0.10;
/// Slope on the single `U(-1, 1)` covariate.
pub const SLOPE: f64 = 4.0;
/// Background intensity bound in the heterogeneous designs.
pub const HETEROGENEOUS_U_MAX: f64 = 0.2;
/// Within-community probability used by the model-selection designs.
pub const SELECTION_P11: f64 = 0.20;

fn check_grid(p11: f64, beta0: f64) -> Result<()> {
    if !(0.15 - 1e-12..=0.25 + 1e-12).contains(&p11) {
        return Err(Error::Config(format!("p11 = {p11} outside [0.15, 0.25]")));
    }
    if ![-1.0, 0.0, 1.0].contains(&beta0) {
        return Err(Error::Config(format!(
            "beta0 = {beta0} not in {{-1, 0, 1}}"
        )));
    }
    Ok(())
}

fn planted_design(
    n: usize,
    k: usize,
    p11: f64,
    beta0: f64,
    background: BackgroundMode,
    seed: u64,
) -> GenConfig {
    let g = k + 1;
    let mut link_probs = vec![BACKGROUND_PROB; g * g];
    for a in 0..k {
        for b in 0..k {
            link_probs[a * g + b] = if a == b { p11 } else { BETWEEN_PROB };
        }
    }
    GenConfig {
        n,
        k,
        beta: vec![beta0, SLOPE],
        pi: vec![1.0 / k as f64; k],
        link_probs,
        background,
        covariates: vec![CovariateDist::default()],
        seed,
        stream: 0,
    }
}

/// Homogeneous-background design: n = 500, two equal communities.
pub fn scenario_table1(p11: f64, beta0: f64, seed: u64) -> Result<GenConfig> {
    check_grid(p11, beta0)?;
    Ok(planted_design(
        500,
        2,
        p11,
        beta0,
        BackgroundMode::Homogeneous,
        seed,
    ))
}

/// As [`scenario_table1`] with heterogeneous background intensities.
pub fn scenario_table2(p11: f64, beta0: f64, seed: u64) -> Result<GenConfig> {
    check_grid(p11, beta0)?;
    Ok(planted_design(
        500,
        2,
        p11,
        beta0,
        BackgroundMode::Heterogeneous {
            u_max: HETEROGENEOUS_U_MAX,
            u_links_communities: false,
        },
        seed,
    ))
}

/// Model-selection designs on a heterogeneous background: `k_true = 2` uses
/// n = 500 and beta0 = 0; `k_true = 5` uses n = 1000 and beta0 = 1.
pub fn scenario_table3(k_true: usize, p11: f64, seed: u64) -> Result<GenConfig> {
    let (n, beta0) = match k_true {
        2 => (500, 0.0),
        5 => (1000, 1.0),
        other => {
            return Err(Error::Config(format!(
                "model-selection design has K = 2 or 5, not {other}"
            )))
        }
    };
    check_grid(p11, beta0)?;
    Ok(planted_design(
        n,
        k_true,
        p11,
        beta0,
        BackgroundMode::Heterogeneous {
            u_max: HETEROGENEOUS_U_MAX,
            u_links_communities: false,
        },
        seed,
    ))
}
