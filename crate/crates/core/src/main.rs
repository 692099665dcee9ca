use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use statrs::function::erf::erfc;

use lrcd::em::{self, FitOptions, Variant};
use lrcd::io;
use lrcd::sim::{self, Scenario, SimConfig};
use lrcd::{logistic, metrics, select, Error};

#[derive(Parser)]
#[command(
    name = "lrcd",
    version,
    about = "Community detection with a background group and covariate-driven membership"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation design and write report.json, timings.json and a CSV.
    Simulate(SimulateArgs),
    /// Fit one K to an edge list with optional covariates.
    Fit(FitArgs),
    /// Choose K by BIC and ICL.
    Select(SelectArgs),
    /// Partition metrics.
    Metrics {
        #[command(subcommand)]
        metric: MetricCommand,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Poisson,
    Multinomial,
    Robust,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Poisson => Variant::Poisson,
            VariantArg::Multinomial => Variant::Multinomial,
            VariantArg::Robust => Variant::Robust,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Table1,
    Table2,
    Table3,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Criterion {
    Bic,
    Icl,
    Both,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    /// Within-community link probability; table3 defaults to 0.20.
    #[arg(long)]
    p11: Option<f64>,
    /// Logistic intercept; table3 derives it from --k-true.
    #[arg(long, allow_negative_numbers = true)]
    beta0: Option<f64>,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    /// Repeat to fit several variants.
    #[arg(long, value_enum, default_values_t = [VariantArg::Poisson])]
    variant: Vec<VariantArg>,
    #[arg(long, overrides_with = "no_logistic")]
    logistic: bool,
    /// Fit with an intercept-only design instead of the covariates.
    #[arg(long)]
    no_logistic: bool,
    /// Fit both with and without the covariates.
    #[arg(long, conflicts_with_all = ["logistic", "no_logistic"])]
    compare_logistic: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Random restarts per fit on top of the deterministic starts.
    #[arg(long, default_value_t = 0)]
    restarts: usize,
    /// table3: number of planted communities (2 or 5).
    #[arg(long, default_value_t = 2)]
    k_true: usize,
    /// table3: largest K scanned.
    #[arg(long, default_value_t = 8)]
    k_max: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InputArgs {
    /// Whitespace-separated edge list with string node ids.
    #[arg(long)]
    edges: PathBuf,
    /// CSV with header `node,<name1>,...`; omitted means intercept only.
    #[arg(long)]
    covariates: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "robust")]
    variant: VariantArg,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Optional `node,label` CSV of the fitted labels.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 1)]
    kmin: usize,
    #[arg(long, default_value_t = 8)]
    kmax: usize,
    #[arg(long, value_enum, default_value = "robust")]
    variant: VariantArg,
    #[arg(long, value_enum, default_value = "both")]
    criterion: Criterion,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MetricCommand {
    /// Adjusted Rand index between two `node,label` CSV files.
    Ari {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

#[derive(Serialize)]
struct Coefficient {
    name: String,
    estimate: f64,
    std_error: Option<f64>,
    z: Option<f64>,
    p_value: Option<f64>,
    odds_ratio: f64,
}

#[derive(Serialize)]
struct FitReport {
    command: String,
    edges: String,
    covariates: Option<String>,
    n: usize,
    edge_count: usize,
    k: usize,
    variant: Variant,
    seed: u64,
    restarts: usize,
    coefficients: Vec<Coefficient>,
    wald_note: String,
    pi: Vec<f64>,
    /// Row `l` holds the block rates of group `l` (1-based, background last).
    rates: Vec<Vec<f64>>,
    group_sizes: Vec<usize>,
    final_pll: f64,
    joint_loglik: f64,
    bic: f64,
    icl: f64,
    outer_iterations: usize,
    restart_index: usize,
    converged: bool,
    warnings: Vec<String>,
    nodes: Vec<String>,
    labels: Vec<usize>,
}

#[derive(Serialize)]
struct SelectOutput {
    command: String,
    criterion: String,
    chosen_k: Vec<(String, usize)>,
    #[serde(flatten)]
    report: select::SelectionReport,
}

fn command_echo() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

fn coefficients(x: &lrcd::CovariateMatrix, beta: &[f64]) -> Vec<Coefficient> {
    let se = logistic::wald_standard_errors(x, beta).ok();
    let names = std::iter::once("(intercept)".to_string()).chain(x.names().iter().cloned());
    names
        .zip(beta)
        .enumerate()
        .map(|(j, (name, &b))| {
            let s = se
                .as_ref()
                .map(|s| s[j])
                .filter(|s| s.is_finite() && *s > 0.0);
            Coefficient {
                name,
                estimate: b,
                std_error: s,
                z: s.map(|s| b / s),
                p_value: s.map(|s| two_sided_p(b / s)),
                odds_ratio: b.exp(),
            }
        })
        .collect()
}

fn run_fit(args: &FitArgs) -> lrcd::Result<()> {
    let data = io::load_dataset(&args.input.edges, args.input.covariates.as_deref())?;
    let variant = Variant::from(args.variant);
    let opts = FitOptions {
        restarts: args.restarts,
        seed: args.seed,
        ..FitOptions::default()
    };
    let fit = em::fit(&data.net, &data.x, args.k, variant, &opts)?;
    let n = data.n();
    let report = FitReport {
        command: command_echo(),
        edges: args.input.edges.display().to_string(),
        covariates: args
            .input
            .covariates
            .as_ref()
            .map(|p| p.display().to_string()),
        n,
        edge_count: data.net.edge_count(),
        k: args.k,
        variant,
        seed: args.seed,
        restarts: args.restarts,
        coefficients: coefficients(&data.x, &fit.params.beta),
        wald_note: "standard errors from the logistic information at the final estimate; \
                    they treat the fitted posterior as known"
            .to_string(),
        pi: fit.params.pi.clone(),
        rates: fit
            .params
            .rates
            .chunks(fit.params.n_cols())
            .map(<[f64]>::to_vec)
            .collect(),
        group_sizes: fit.c_hat.sizes(),
        final_pll: fit.final_pll,
        joint_loglik: fit.joint_loglik,
        bic: select::bic_from_loglik(fit.joint_loglik, n, args.k),
        icl: select::icl_from_loglik(fit.joint_loglik, n, args.k),
        outer_iterations: fit.outer_iterations,
        restart_index: fit.restart_index,
        converged: fit.converged,
        warnings: fit.warnings.clone(),
        nodes: data.ids.clone(),
        labels: fit.c_hat.to_one_based(),
    };
    io::write_file(&args.out, &io::to_json(&report)?)?;
    if let Some(path) = &args.labels {
        io::write_file(path, &io::labels_string(&data.ids, &fit.c_hat))?;
    }
    for w in &fit.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn run_select(args: &SelectArgs) -> lrcd::Result<()> {
    if args.kmin == 0 || args.kmin > args.kmax {
        return Err(Error::Config(format!(
            "need 1 <= kmin <= kmax, got {}..{}",
            args.kmin, args.kmax
        )));
    }
    let data = io::load_dataset(&args.input.edges, args.input.covariates.as_deref())?;
    let opts = FitOptions {
        restarts: args.restarts,
        seed: args.seed,
        ..FitOptions::default()
    };
    let ks: Vec<usize> = (args.kmin..=args.kmax).collect();
    let report = select::select_k(&data.net, &data.x, &ks, args.variant.into(), &opts)?;
    let mut chosen = Vec::new();
    if args.criterion != Criterion::Icl {
        chosen.push(("bic".to_string(), report.chosen_k_bic));
    }
    if args.criterion != Criterion::Bic {
        chosen.push(("icl".to_string(), report.chosen_k_icl));
    }
    let out = SelectOutput {
        command: command_echo(),
        criterion: match args.criterion {
            Criterion::Bic => "bic",
            Criterion::Icl => "icl",
            Criterion::Both => "both",
        }
        .to_string(),
        chosen_k: chosen,
        report,
    };
    let json = io::to_json(&out)?;
    match &args.out {
        Some(path) => io::write_file(path, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn run_simulate(args: &SimulateArgs) -> lrcd::Result<()> {
    let scenario = match args.scenario {
        ScenarioArg::Table1 => Scenario::Table1,
        ScenarioArg::Table2 => Scenario::Table2,
        ScenarioArg::Table3 => Scenario::Table3,
    };
    let p11 = match (args.p11, scenario) {
        (Some(p), _) => p,
        (None, Scenario::Table3) => lrcd::synth::SELECTION_P11,
        (None, _) => return Err(Error::Config("--p11 is required".into())),
    };
    let logistic = if args.compare_logistic {
        vec![true, false]
    } else {
        vec![!args.no_logistic || args.logistic]
    };
    let mut variants: Vec<Variant> = Vec::new();
    for v in &args.variant {
        let v = Variant::from(*v);
        if !variants.contains(&v) {
            variants.push(v);
        }
    }
    let config = SimConfig {
        scenario,
        p11,
        beta0: args.beta0,
        k_true: args.k_true,
        k_max: args.k_max,
        replicates: args.replicates,
        variants,
        logistic,
        seed: args.seed,
        restarts: args.restarts,
    };
    let mut report = sim::run_simulation(&config, &command_echo())?;
    sim::write_outputs(&mut report, &args.out)?;
    for agg in &report.aggregates {
        println!(
            "{:<12} logistic={:<5} mean ARIx100 {} sd {} ({} ok, {} failed)",
            agg.variant.name(),
            agg.logistic,
            agg.mean_ari_x100.map_or("-".into(), |m| format!("{m:.1}")),
            agg.sd_ari_x100.map_or("-".into(), |s| format!("{s:.1}")),
            agg.replicates_ok,
            agg.failures
        );
    }
    for sel in &report.selection {
        println!(
            "{:<12} logistic={:<5} K={} chosen by BIC {:.2}, by ICL {:.2} ({} ok)",
            sel.variant.name(),
            sel.logistic,
            sel.k_true,
            sel.correct_bic(),
            sel.correct_icl(),
            sel.replicates_ok
        );
    }
    Ok(())
}

fn run_ari(a: &Path, b: &Path) -> lrcd::Result<()> {
    let (la, lb) = io::align_labels(&io::load_labels(a)?, &io::load_labels(b)?)?;
    println!(
        "{}",
        io::format_f64(metrics::adjusted_rand_index(&la, &lb)?)
    );
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Ingest { .. } | Error::Join { .. } | Error::Io(_) | Error::Config(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Fit(args) => run_fit(args),
        Command::Select(args) => run_select(args),
        Command::Metrics {
            metric: MetricCommand::Ari { a, b },
        } => run_ari(a, b),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
