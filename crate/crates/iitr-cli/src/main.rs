//! `iitr` — fit, evaluate, and benchmark interpretable treatment rules.
//!
//! Subcommands:
//!
//! * `fit` — learn a sparse linear policy from a CSV table and write the
//!   policy archive, the cross-validation path, and a fit log.
//! * `evaluate` — apply a stored policy to a dataset and report its doubly
//!   robust value estimate as JSON on stdout.
//! * `complementary` — trace out the value of the best k-variable policy
//!   for each k, using a stored policy's coefficients for the ranking.
//! * `simulate` — run the Monte Carlo benchmark against the built-in data
//!   generator and write per-repetition rows plus a summary.
//!
//! Exit codes: 0 on success, 1 for input problems (bad configuration, bad
//! data, missing columns), 2 for computation failures (non-convergence,
//! degenerate fits). Logs go to stderr; outputs are deterministic given the
//! same inputs and seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use iitr::config::RunConfig;
use iitr::dataset::{kfold_split, load_table, normalize};
use iitr::error::{Error, Result};
use iitr::nuisance::{estimate_value_aipw, NuisanceEstimator};
use iitr::pipeline::{complementary_analysis, cv_path, fit_full, LambdaRule};
use iitr::report::{
    fmt_sig, write_benchmark_csv, write_cv_csv, write_value_curve_csv, CvChoice, PolicyFile,
    SummaryFile,
};
use iitr::sim::run_benchmark;

#[derive(Parser)]
#[command(
    name = "iitr",
    version,
    about = "Interpretable individualized treatment rules",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a sparse linear treatment rule from a CSV table.
    Fit {
        /// Input table (CSV with a header row).
        #[arg(long)]
        data: PathBuf,
        /// Run configuration (.toml or .json); defaults apply if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Apply a stored policy to a dataset and estimate its value.
    Evaluate {
        /// Input table (CSV with a header row).
        #[arg(long)]
        data: PathBuf,
        /// Policy archive written by `fit`.
        #[arg(long)]
        policy: PathBuf,
        /// Run configuration (.toml or .json); defaults apply if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Value of the best k-variable policy for each k.
    Complementary {
        /// Input table (CSV with a header row).
        #[arg(long)]
        data: PathBuf,
        /// Policy archive written by `fit` (provides the variable ranking).
        #[arg(long)]
        policy: PathBuf,
        /// Run configuration (.toml or .json); defaults apply if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo benchmark on the built-in data generator.
    Simulate {
        /// Run configuration (.toml or .json); defaults apply if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(if e.is_validation() { 1 } else { 2 });
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit {
            data,
            config,
            out,
            seed,
        } => cmd_fit(&data, config.as_deref(), &out, seed),
        Command::Evaluate {
            data,
            policy,
            config,
        } => cmd_evaluate(&data, &policy, config.as_deref()),
        Command::Complementary {
            data,
            policy,
            config,
            out,
        } => cmd_complementary(&data, &policy, config.as_deref(), &out),
        Command::Simulate { config, out, seed } => cmd_simulate(config.as_deref(), &out, seed),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// Policy mask from the exclusion list: every excluded name must exist.
fn exclusion_mask(names: &[String], exclude: &[String]) -> Result<Option<Vec<bool>>> {
    if exclude.is_empty() {
        return Ok(None);
    }
    for name in exclude {
        if !names.contains(name) {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    Ok(Some(
        names.iter().map(|n| !exclude.contains(n)).collect(),
    ))
}

fn cmd_fit(data: &Path, config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(config)?;
    let config_hash = cfg.hash();
    let seed = cfg.effective_seed(seed);

    let ds = load_table(data, &cfg.table_spec())?;
    let nd = normalize(ds)?;
    let mask = exclusion_mask(&nd.base.names, &cfg.policy.exclude)?;
    let folds = kfold_split(nd.base.treatment.view(), cfg.cv.k, seed)?;
    let lambdas = cfg.lambda_grid()?;
    let settings = cfg.fit_settings();
    let nuisance = cfg.glm_nuisance();

    let cv = cv_path(&nd, &folds, &lambdas, &settings, &nuisance, mask.as_deref())?;
    let lambda = match cfg.policy.lambda_rule {
        LambdaRule::Min => cv.lambda_min,
        LambdaRule::OneSe => cv.lambda_1se,
    };
    let full = fit_full(
        &nd,
        lambda,
        &settings,
        cfg.policy.prune_frac,
        &nuisance,
        mask.as_deref(),
    )?;

    std::fs::create_dir_all(out)?;
    let policy_file = PolicyFile::from_fit(
        &full,
        &nd.standardizer,
        CvChoice {
            lambda_min: cv.lambda_min,
            lambda_1se: cv.lambda_1se,
        },
        cfg.policy.lambda_rule,
        config_hash.clone(),
    )?;
    policy_file.write(&out.join("policy.json"))?;
    write_cv_csv(&out.join("cv_path.csv"), &cv)?;

    let mut log = BufWriter::new(File::create(out.join("fit.log"))?);
    writeln!(log, "config_hash: {config_hash}")?;
    writeln!(log, "seed: {seed}")?;
    writeln!(log, "n: {}", nd.n())?;
    writeln!(log, "p: {}", nd.p())?;
    writeln!(log, "k_folds: {}", cfg.cv.k)?;
    writeln!(log, "loss: {}", settings.loss)?;
    writeln!(log, "lambda_rule: {}", cfg.policy.lambda_rule)?;
    writeln!(log, "lambda_min: {}", fmt_sig(cv.lambda_min))?;
    writeln!(log, "lambda_1se: {}", fmt_sig(cv.lambda_1se))?;
    writeln!(log, "lambda_used: {}", fmt_sig(lambda))?;
    writeln!(log, "path_converged: {}", full.fit.converged)?;
    writeln!(log, "path_outer_iterations: {}", full.fit.outer_iterations)?;
    writeln!(log, "refit_converged: {}", full.refit_fit.converged)?;
    writeln!(log, "selected: {}", policy_file.selected.join(", "))?;
    for entry in &policy_file.coefficients {
        writeln!(
            log,
            "coefficient {}: normalized {} raw {}",
            entry.name,
            fmt_sig(entry.normalized),
            fmt_sig(entry.raw)
        )?;
    }
    log.flush()?;

    println!("wrote {}", out.join("policy.json").display());
    println!("wrote {}", out.join("cv_path.csv").display());
    println!("wrote {}", out.join("fit.log").display());
    Ok(())
}

/// JSON report printed by `evaluate`.
#[derive(Serialize)]
struct EvaluationReport {
    /// Units in the evaluated dataset.
    n: usize,
    /// Units the policy recommends treating.
    treat_recommended: usize,
    fraction_treated: f64,
    /// Doubly robust value estimate of the policy on this data.
    value: f64,
    ci_lower: f64,
    ci_upper: f64,
    /// Hash of the configuration the policy was trained under.
    policy_config_hash: String,
}

fn cmd_evaluate(data: &Path, policy_path: &Path, config: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?;
    let policy_file = PolicyFile::read(policy_path)?;
    let policy = policy_file.to_policy()?;

    let ds = load_table(data, &cfg.table_spec())?;
    // Assignments use the stored standardization, applied to raw covariates
    // matched by name; nuisances are fit fresh on this dataset.
    let d = iitr::pipeline::predict(
        &policy,
        &policy_file.standardizer,
        ds.covariates.view(),
        &ds.names,
    )?;
    let nd = normalize(ds)?;
    let nuisance = cfg.glm_nuisance();
    let fitted = nuisance.fit(
        nd.design.view(),
        nd.base.treatment.view(),
        nd.base.outcome.view(),
    )?;
    let nf = fitted.predict(nd.design.view())?;
    let value = estimate_value_aipw(
        nd.base.treatment.view(),
        nd.base.outcome.view(),
        &nf,
        d.view(),
    )?;

    let treat = d.iter().filter(|&&x| x > 0.5).count();
    let report = EvaluationReport {
        n: nd.n(),
        treat_recommended: treat,
        fraction_treated: treat as f64 / nd.n() as f64,
        value: value.value,
        ci_lower: value.ci_lower,
        ci_upper: value.ci_upper,
        policy_config_hash: policy_file.config_hash.clone(),
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Computation(format!("serializing evaluation: {e}")))?;
    println!("{text}");
    Ok(())
}

fn cmd_complementary(
    data: &Path,
    policy_path: &Path,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let cfg = load_config(config)?;
    let policy_file = PolicyFile::read(policy_path)?;

    let ds = load_table(data, &cfg.table_spec())?;
    let nd = normalize(ds)?;
    if nd.base.names != policy_file.standardizer.names {
        return Err(Error::Invalid(
            "dataset columns do not match the policy's training columns".into(),
        ));
    }
    let settings = cfg.fit_settings();
    let nuisance = cfg.glm_nuisance();
    let eta_full = policy_file.eta_full_array();
    let curve = complementary_analysis(
        &nd,
        eta_full.view(),
        &cfg.policy.exclude,
        &settings,
        &nuisance,
    )?;

    std::fs::create_dir_all(out)?;
    write_value_curve_csv(&out.join("value_curve.csv"), &curve)?;
    println!("wrote {}", out.join("value_curve.csv").display());
    Ok(())
}

fn cmd_simulate(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(config)?;
    let bench = cfg.benchmark_config(seed);
    let nuisance = cfg.glm_nuisance();
    let (rows, summary) = run_benchmark(&bench, &nuisance)?;

    std::fs::create_dir_all(out)?;
    write_benchmark_csv(&out.join("benchmark.csv"), &rows)?;
    SummaryFile::new(&summary, cfg.hash(), bench.seed).write(&out.join("summary.json"))?;

    println!("wrote {}", out.join("benchmark.csv").display());
    println!("wrote {}", out.join("summary.json").display());
    println!(
        "reps: {} failures: {} mean_value: {} mean_ccr: {}",
        summary.reps,
        summary.failures,
        fmt_sig(summary.mean_value),
        fmt_sig(summary.mean_ccr)
    );
    Ok(())
}
