//! Replicate harness for the simulation designs.
//!
//! Replicate `r` draws its network from stream `r` of a generation seed and
//! fits with its own fitting seed, both derived from the master seed, so
//! reports do not depend on scheduling. Fits with and without the logistic
//! component share the replicate's network; "without" means an
//! intercept-only design.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::{self, FitOptions, Variant};
use crate::error::{Error, Result};
use crate::io;
use crate::metrics;
use crate::network::CovariateMatrix;
use crate::select;
use crate::synth::{self, GenConfig, SyntheticNetwork};

const GENERATION_DOMAIN: u32 = 0;
const FITTING_DOMAIN: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Table1,
    Table2,
    Table3,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(Scenario::Table1),
            "table2" => Ok(Scenario::Table2),
            "table3" => Ok(Scenario::Table3),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub p11: f64,
    /// Required for table1 and table2; table3 fixes it from `k_true`.
    pub beta0: Option<f64>,
    /// table3 only.
    pub k_true: usize,
    /// table3 only: K is scanned over `1..=k_max`.
    pub k_max: usize,
    pub replicates: usize,
    pub variants: Vec<Variant>,
    /// One pass per entry: `true` fits with the covariates, `false` with an
    /// intercept-only design.
    pub logistic: Vec<bool>,
    pub seed: u64,
    /// Random restarts on top of the deterministic starts.
    pub restarts: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Table1,
            p11: 0.25,
            beta0: Some(0.0),
            k_true: 2,
            k_max: 8,
            replicates: 100,
            variants: vec![Variant::Poisson],
            logistic: vec![true],
            seed: 1,
            restarts: 0,
        }
    }
}

impl SimConfig {
    pub fn gen_config(&self) -> Result<GenConfig> {
        let seed = synth::derive_seed(self.seed, GENERATION_DOMAIN, 0);
        let need_beta0 = || {
            self.beta0
                .ok_or_else(|| Error::Config(format!("{:?} needs beta0", self.scenario)))
        };
        match self.scenario {
            Scenario::Table1 => synth::scenario_table1(self.p11, need_beta0()?, seed),
            Scenario::Table2 => synth::scenario_table2(self.p11, need_beta0()?, seed),
            Scenario::Table3 => {
                let cfg = synth::scenario_table3(self.k_true, self.p11, seed)?;
                match self.beta0 {
                    Some(b) if b != cfg.beta[0] => Err(Error::Config(format!(
                        "table3 with K = {} fixes beta0 = {}, got {b}",
                        self.k_true, cfg.beta[0]
                    ))),
                    _ => Ok(cfg),
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be positive".into()));
        }
        if self.variants.is_empty() || self.logistic.is_empty() {
            return Err(Error::Config("nothing to fit".into()));
        }
        if self.scenario == Scenario::Table3 && self.k_max == 0 {
            return Err(Error::Config("k_max must be positive".into()));
        }
        self.gen_config().map(|_| ())
    }

    fn fit_options(&self, replicate: usize) -> FitOptions {
        FitOptions {
            restarts: self.restarts,
            seed: synth::derive_seed(self.seed, FITTING_DOMAIN, replicate as u32),
            ..FitOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub variant: Variant,
    pub logistic: bool,
    /// ARI against the true labels, background as its own group.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_k_bic: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_k_icl: Option<usize>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub variant: Variant,
    pub logistic: bool,
    pub replicates_ok: usize,
    pub failures: usize,
    pub mean_ari_x100: Option<f64>,
    /// Sample standard deviation (divisor `m - 1`).
    pub sd_ari_x100: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionAggregate {
    pub variant: Variant,
    pub logistic: bool,
    pub k_true: usize,
    pub replicates_ok: usize,
    /// Entry `K - 1` is the share of successful replicates choosing `K`.
    pub proportions_bic: Vec<f64>,
    pub proportions_icl: Vec<f64>,
}

impl SelectionAggregate {
    pub fn correct_bic(&self) -> f64 {
        self.proportions_bic[self.k_true - 1]
    }

    pub fn correct_icl(&self) -> f64 {
        self.proportions_icl[self.k_true - 1]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub replicate_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub config: SimConfig,
    pub generator: GenConfig,
    pub notes: Vec<String>,
    pub replicates: Vec<ReplicateRecord>,
    pub aggregates: Vec<Aggregate>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub selection: Vec<SelectionAggregate>,
    pub outputs: Vec<String>,
    /// Wall-clock data; written to its own file so the report stays
    /// reproducible.
    #[serde(skip)]
    pub timings: Timings,
}

/// Mean and sample standard deviation; `None` where undefined.
pub fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let m = values.len();
    if m == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m < 2 {
        return (Some(mean), None);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (Some(mean), Some((ss / (m - 1) as f64).sqrt()))
}

fn design(data: &SyntheticNetwork, logistic: bool) -> CovariateMatrix {
    if logistic {
        data.x.clone()
    } else {
        CovariateMatrix::intercept_only(data.net.n())
    }
}

fn run_replicate(config: &SimConfig, gen: &GenConfig, r: usize) -> Vec<ReplicateRecord> {
    let record = |variant, logistic| ReplicateRecord {
        replicate: r,
        variant,
        logistic,
        ari: None,
        chosen_k_bic: None,
        chosen_k_icl: None,
        warnings: Vec::new(),
        error: None,
    };
    let data = match synth::generate(&gen.with_stream(r as u64)) {
        Ok(d) => d,
        Err(e) => {
            return config
                .variants
                .iter()
                .flat_map(|&v| config.logistic.iter().map(move |&l| (v, l)))
                .map(|(v, l)| ReplicateRecord {
                    error: Some(format!("generation: {e}")),
                    ..record(v, l)
                })
                .collect()
        }
    };
    let opts = config.fit_options(r);
    let mut out = Vec::new();
    for &variant in &config.variants {
        for &logistic in &config.logistic {
            let x = design(&data, logistic);
            let mut rec = record(variant, logistic);
            let outcome = match config.scenario {
                Scenario::Table1 | Scenario::Table2 => {
                    em::fit(&data.net, &x, gen.k, variant, &opts).and_then(|fit| {
                        rec.ari = Some(metrics::adjusted_rand_index(
                            fit.c_hat.groups(),
                            data.c_true.groups(),
                        )?);
                        rec.warnings = fit.warnings;
                        Ok(())
                    })
                }
                Scenario::Table3 => {
                    let ks: Vec<usize> = (1..=config.k_max).collect();
                    select::select_k(&data.net, &x, &ks, variant, &opts).map(|sel| {
                        rec.chosen_k_bic = Some(sel.chosen_k_bic);
                        rec.chosen_k_icl = Some(sel.chosen_k_icl);
                        rec.warnings = sel
                            .failures
                            .iter()
                            .map(|(k, e)| format!("K = {k} failed: {e}"))
                            .collect();
                    })
                }
            };
            if let Err(e) = outcome {
                rec.error = Some(e.to_string());
            }
            out.push(rec);
        }
    }
    out
}

fn aggregate(config: &SimConfig, records: &[ReplicateRecord]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &variant in &config.variants {
        for &logistic in &config.logistic {
            let cell: Vec<&ReplicateRecord> = records
                .iter()
                .filter(|r| r.variant == variant && r.logistic == logistic)
                .collect();
            let aris: Vec<f64> = cell
                .iter()
                .filter_map(|r| r.ari)
                .map(|a| 100.0 * a)
                .collect();
            let (mean, sd) = mean_sd(&aris);
            out.push(Aggregate {
                variant,
                logistic,
                replicates_ok: cell.iter().filter(|r| r.error.is_none()).count(),
                failures: cell.iter().filter(|r| r.error.is_some()).count(),
                mean_ari_x100: mean,
                sd_ari_x100: sd,
            });
        }
    }
    out
}

fn selection_aggregate(config: &SimConfig, records: &[ReplicateRecord]) -> Vec<SelectionAggregate> {
    let mut out = Vec::new();
    for &variant in &config.variants {
        for &logistic in &config.logistic {
            let ok: Vec<&ReplicateRecord> = records
                .iter()
                .filter(|r| r.variant == variant && r.logistic == logistic && r.error.is_none())
                .collect();
            let share = |pick: fn(&ReplicateRecord) -> Option<usize>| {
                let mut counts = vec![0usize; config.k_max];
                for r in &ok {
                    if let Some(k) = pick(r) {
                        counts[k - 1] += 1;
                    }
                }
                counts
                    .into_iter()
                    .map(|c| {
                        if ok.is_empty() {
                            0.0
                        } else {
                            c as f64 / ok.len() as f64
                        }
                    })
                    .collect()
            };
            out.push(SelectionAggregate {
                variant,
                logistic,
                k_true: config.k_true,
                replicates_ok: ok.len(),
                proportions_bic: share(|r| r.chosen_k_bic),
                proportions_icl: share(|r| r.chosen_k_icl),
            });
        }
    }
    out
}

/// Runs every replicate of `config` and aggregates the results. Failed fits
/// are recorded on their replicate and left out of the aggregates.
pub fn run_simulation(config: &SimConfig, command: &str) -> Result<RunReport> {
    config.validate()?;
    let gen = config.gen_config()?;
    let start = Instant::now();
    let per_replicate: Vec<(Vec<ReplicateRecord>, f64)> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let t = Instant::now();
            let recs = run_replicate(config, &gen, r);
            (recs, t.elapsed().as_secs_f64())
        })
        .collect();
    let timings = Timings {
        total_seconds: start.elapsed().as_secs_f64(),
        replicate_seconds: per_replicate.iter().map(|(_, t)| *t).collect(),
    };
    let replicates: Vec<ReplicateRecord> = per_replicate.into_iter().flat_map(|(r, _)| r).collect();

    let mut notes = vec![
        "ARI treats the background as an ordinary group".to_string(),
        "logistic = false fits an intercept-only design, so the community share is a fitted \
         constant"
            .to_string(),
    ];
    let (aggregates, selection) = match config.scenario {
        Scenario::Table3 => {
            notes.push(
                "K chosen by BIC and ICL on the blockmodel joint likelihood at the fitted labels"
                    .to_string(),
            );
            (Vec::new(), selection_aggregate(config, &replicates))
        }
        _ => (aggregate(config, &replicates), Vec::new()),
    };
    Ok(RunReport {
        command: command.to_string(),
        seed: config.seed,
        config: config.clone(),
        generator: gen,
        notes,
        replicates,
        aggregates,
        selection,
        outputs: Vec::new(),
        timings,
    })
}

fn ari_csv(report: &RunReport) -> String {
    let mut out = String::from("replicate,variant,logistic,ari\n");
    for r in &report.replicates {
        let ari = r.ari.map(io::format_f64).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{ari}\n",
            r.replicate, r.variant, r.logistic
        ));
    }
    out
}

fn selection_csv(report: &RunReport) -> String {
    let mut out = String::from("replicate,variant,logistic,chosen_k_bic,chosen_k_icl\n");
    for r in &report.replicates {
        let show = |k: Option<usize>| k.map(|k| k.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.replicate,
            r.variant,
            r.logistic,
            show(r.chosen_k_bic),
            show(r.chosen_k_icl)
        ));
    }
    out
}

/// Writes `report.json`, `timings.json` and the per-replicate CSV into
/// `dir`, recording the paths in `report.outputs`.
pub fn write_outputs(report: &mut RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let csv_name = match report.config.scenario {
        Scenario::Table3 => "selection.csv",
        _ => "ari.csv",
    };
    let paths: Vec<PathBuf> = ["report.json", "timings.json", csv_name]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    report.outputs = paths.iter().map(|p| p.display().to_string()).collect();
    io::write_file(&paths[0], &io::to_json(report)?)?;
    io::write_file(&paths[1], &io::to_json(&report.timings)?)?;
    let table = match report.config.scenario {
        Scenario::Table3 => selection_csv(report),
        _ => ari_csv(report),
    };
    io::write_file(&paths[2], &table)?;
    Ok(paths)
}
