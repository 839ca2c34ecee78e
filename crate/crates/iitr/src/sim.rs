//! Synthetic benchmark: a data generator with a known optimal rule, plus a
//! Monte Carlo harness that runs the full estimation pipeline against it.
//!
//! The generator draws independent standard normal covariates and builds
//!
//! * a logistic treatment assignment `P(A = 1 | x) = sigmoid(b0 + b'x)`,
//! * a linear control-arm mean `mu0(x) = c0 + c'x`,
//! * a treatment effect `tau(x) = (s - r)(s + u)` driven by the sum
//!   `s = x_a + x_b` of two signal covariates, and
//! * outcomes `Y = mu0(x) + A tau(x) + noise`.
//!
//! With the default roots (`r = 0.5`, `u = 10`) the effect is positive
//! essentially exactly when `s > r`, so the optimal rule is linear in the
//! covariates and a sparse linear policy can recover it. The [`Oracle`]
//! carries the per-unit truths so fitted policies can be scored exactly.
//!
//! Everything is seeded: the same configuration always produces the same
//! draws, and each benchmark repetition uses its own deterministic stream.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{kfold_split, normalize, Dataset};
use crate::error::{Error, Result};
use crate::nuisance::NuisanceEstimator;
use crate::pipeline::{cv_path, fit_full, lambda_grid, policy_assignments, FitSettings, LambdaRule};

/// Configuration of the synthetic data generator.
///
/// Slope vectors may be shorter than `p`; they are padded with zeros. The
/// defaults put signal in the first four covariates and leave the rest as
/// noise, matching the benchmark the acceptance suite runs.
#[derive(Debug, Clone)]
pub struct DgpConfig {
    /// Number of units to draw.
    pub n: usize,
    /// Number of covariates (at least 2).
    pub p: usize,
    /// RNG seed.
    pub seed: u64,
    /// Standard deviation of the outcome noise.
    pub noise_sd: f64,
    /// Intercept of the logistic propensity model.
    pub propensity_intercept: f64,
    /// Propensity slopes (None = `0.3 x1 - 0.3 x3`, truncated to `p`).
    pub propensity_slopes: Option<Vec<f64>>,
    /// Intercept of the control-arm mean.
    pub mu0_intercept: f64,
    /// Control-arm slopes (None = `0.5 x1 + 0.5 x3 - 0.5 x4`, truncated).
    pub mu0_slopes: Option<Vec<f64>>,
    /// Zero-based indices of the two signal covariates in the effect.
    pub tau_vars: [usize; 2],
    /// Lower root of the effect: `tau > 0` for `s` above this, up to sign.
    pub tau_lower_root: f64,
    /// Offset of the (far negative) second root.
    pub tau_upper_shift: f64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            n: 3000,
            p: 20,
            seed: 17,
            noise_sd: 1.0,
            propensity_intercept: 0.0,
            propensity_slopes: None,
            mu0_intercept: 1.0,
            mu0_slopes: None,
            tau_vars: [0, 1],
            tau_lower_root: 0.5,
            tau_upper_shift: 10.0,
        }
    }
}

/// Per-unit ground truth for a generated dataset.
#[derive(Debug, Clone)]
pub struct Oracle {
    /// True treatment effect `tau(x_i)`.
    pub true_tau: Array1<f64>,
    /// True assignment probability.
    pub true_propensity: Array1<f64>,
    /// True control-arm mean.
    pub true_mu0: Array1<f64>,
    /// True treated-arm mean (`mu0 + tau`).
    pub true_mu1: Array1<f64>,
    /// Value-maximizing assignment `1{tau > 0}`.
    pub optimal: Array1<f64>,
}

fn resolve_slopes(given: &Option<Vec<f64>>, pattern: &[f64], p: usize, what: &str) -> Result<Vec<f64>> {
    let base: Vec<f64> = match given {
        Some(v) => {
            if v.len() > p {
                return Err(Error::Config(format!(
                    "{what} has {} slopes but there are only {p} covariates",
                    v.len()
                )));
            }
            v.clone()
        }
        None => pattern.iter().copied().take(p).collect(),
    };
    let mut out = vec![0.0; p];
    out[..base.len()].copy_from_slice(&base);
    Ok(out)
}

struct ResolvedDgp {
    prop_slopes: Vec<f64>,
    mu0_slopes: Vec<f64>,
}

fn resolve(cfg: &DgpConfig) -> Result<ResolvedDgp> {
    if cfg.p < 2 {
        return Err(Error::Config(format!(
            "the generator needs at least 2 covariates, got {}",
            cfg.p
        )));
    }
    if cfg.n == 0 {
        return Err(Error::Config("cannot generate an empty dataset".into()));
    }
    if !(cfg.noise_sd >= 0.0) {
        return Err(Error::Config(format!(
            "noise_sd must be non-negative, got {}",
            cfg.noise_sd
        )));
    }
    let [a, b] = cfg.tau_vars;
    if a >= cfg.p || b >= cfg.p {
        return Err(Error::Config(format!(
            "tau_vars {:?} out of range for p = {}",
            cfg.tau_vars, cfg.p
        )));
    }
    if a == b {
        return Err(Error::Config("the two effect covariates must differ".into()));
    }
    Ok(ResolvedDgp {
        prop_slopes: resolve_slopes(&cfg.propensity_slopes, &[0.3, 0.0, -0.3], cfg.p, "propensity")?,
        mu0_slopes: resolve_slopes(&cfg.mu0_slopes, &[0.5, 0.0, 0.5, -0.5], cfg.p, "mu0")?,
    })
}

fn oracle_from_covariates(cfg: &DgpConfig, resolved: &ResolvedDgp, x: &Array2<f64>) -> Oracle {
    let n = x.nrows();
    let mut e = Array1::zeros(n);
    let mut mu0 = Array1::zeros(n);
    let mut tau = Array1::zeros(n);
    for i in 0..n {
        let row = x.row(i);
        let lin_e: f64 = cfg.propensity_intercept
            + row.iter().zip(&resolved.prop_slopes).map(|(x, b)| x * b).sum::<f64>();
        e[i] = 1.0 / (1.0 + (-lin_e).exp());
        mu0[i] = cfg.mu0_intercept
            + row.iter().zip(&resolved.mu0_slopes).map(|(x, b)| x * b).sum::<f64>();
        let s = row[cfg.tau_vars[0]] + row[cfg.tau_vars[1]];
        tau[i] = (s - cfg.tau_lower_root) * (s + cfg.tau_upper_shift);
    }
    let mu1 = &mu0 + &tau;
    let optimal = tau.mapv(|t| if t > 0.0 { 1.0 } else { 0.0 });
    Oracle {
        true_tau: tau,
        true_propensity: e,
        true_mu0: mu0,
        true_mu1: mu1,
        optimal,
    }
}

/// Draw `n` units from an already-seeded stream. Draw order is fixed:
/// covariates row by row, then assignments, then outcome noise.
fn generate_n(cfg: &DgpConfig, n: usize, rng: &mut ChaCha8Rng) -> Result<(Dataset, Oracle)> {
    let resolved = resolve(cfg)?;
    let p = cfg.p;
    let mut x = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            x[[i, j]] = rng.sample(StandardNormal);
        }
    }
    let oracle = oracle_from_covariates(cfg, &resolved, &x);
    let mut a = Array1::<f64>::zeros(n);
    for i in 0..n {
        a[i] = if rng.gen::<f64>() < oracle.true_propensity[i] {
            1.0
        } else {
            0.0
        };
    }
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let noise: f64 = rng.sample(StandardNormal);
        y[i] = oracle.true_mu0[i] + a[i] * oracle.true_tau[i] + cfg.noise_sd * noise;
    }
    let names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    let ds = Dataset::new(names, x, a, y)?;
    Ok((ds, oracle))
}

/// Generate a dataset and its oracle from the configuration's own seed.
pub fn generate(cfg: &DgpConfig) -> Result<(Dataset, Oracle)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    generate_n(cfg, cfg.n, &mut rng)
}

/// Average outcome if assignments `d` were applied to these units,
/// computed from the oracle (noise averaged out).
pub fn true_value(d: ArrayView1<f64>, oracle: &Oracle) -> Result<f64> {
    let n = oracle.true_tau.len();
    if d.len() != n {
        return Err(Error::Invalid(format!(
            "assignment vector has {} entries for {} units",
            d.len(),
            n
        )));
    }
    let mut total = 0.0;
    for i in 0..n {
        total += oracle.true_mu0[i] + d[i] * oracle.true_tau[i];
    }
    Ok(total / n as f64)
}

/// Fraction of units on which `d` agrees with the optimal rule.
pub fn ccr(d: ArrayView1<f64>, oracle: &Oracle) -> Result<f64> {
    let n = oracle.optimal.len();
    if d.len() != n {
        return Err(Error::Invalid(format!(
            "assignment vector has {} entries for {} units",
            d.len(),
            n
        )));
    }
    let agree = d
        .iter()
        .zip(oracle.optimal.iter())
        .filter(|(a, b)| (**a > 0.5) == (**b > 0.5))
        .count();
    Ok(agree as f64 / n as f64)
}

/// Monte Carlo benchmark configuration: the generator plus the pipeline
/// settings each repetition runs with.
#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    /// Number of repetitions.
    pub reps: usize,
    /// Training sample size per repetition.
    pub n_train: usize,
    /// Evaluation sample size per repetition (scored against the oracle).
    pub n_eval: usize,
    /// Base seed; repetition `r` uses stream `seed + r`.
    pub seed: u64,
    /// Generator settings (its `n` and `seed` fields are ignored here).
    pub dgp: DgpConfig,
    /// Cross-validation folds.
    pub k_folds: usize,
    /// Penalty grid bounds and length (geometric).
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_len: usize,
    /// Which cross-validated lambda the full fit uses.
    pub lambda_rule: LambdaRule,
    /// Pruning threshold as a fraction of the largest coefficient.
    pub prune_frac: f64,
    /// Loss, penalty exponent, and solver controls.
    pub settings: FitSettings,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            reps: 50,
            n_train: 3000,
            n_eval: 1000,
            seed: 17,
            dgp: DgpConfig::default(),
            k_folds: 5,
            lambda_min: 1e-4,
            lambda_max: 10.0,
            lambda_len: 20,
            lambda_rule: LambdaRule::OneSe,
            prune_frac: 0.01,
            settings: FitSettings::default(),
        }
    }
}

/// One benchmark repetition. Failed repetitions keep their row with NaN
/// metrics and `converged = 0`.
#[derive(Debug, Clone)]
pub struct BenchmarkRow {
    /// Repetition index (0-based).
    pub rep: usize,
    /// True value of the fitted policy on the evaluation draw.
    pub value: f64,
    /// `value` divided by the value of the optimal rule on the same draw.
    pub value_ratio: f64,
    /// Agreement with the optimal rule on the evaluation draw.
    pub ccr: f64,
    /// Number of covariates the fitted policy retained.
    pub n_selected: f64,
    /// 1 if the first signal covariate was selected.
    pub selected_x1: f64,
    /// 1 if the second signal covariate was selected.
    pub selected_x2: f64,
    /// Selected covariates that carry no treatment-effect signal.
    pub false_positives: f64,
    /// 1 if both the path fit and the refit converged.
    pub converged: f64,
}

/// Aggregates over the successful benchmark repetitions.
#[derive(Debug, Clone)]
pub struct BenchmarkSummary {
    pub reps: usize,
    /// Repetitions that errored out entirely.
    pub failures: usize,
    pub mean_value: f64,
    pub sd_value: f64,
    /// Mean over repetitions of the optimal rule's value on the eval draw.
    pub mean_best_linear: f64,
    pub mean_value_ratio: f64,
    pub mean_ccr: f64,
    pub sd_ccr: f64,
    pub mean_n_selected: f64,
    /// Fraction of successful repetitions selecting each covariate.
    pub selection_freq: Vec<(String, f64)>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0);
    (m, var.sqrt())
}

/// Run the full pipeline against fresh draws, `cfg.reps` times.
///
/// Each repetition seeds its own stream with `cfg.seed + rep`, draws a
/// training set and an evaluation set, cross-validates the penalty, fits
/// and prunes the policy, and scores it against the oracle on the
/// evaluation draw. Runs are sequential and fully reproducible.
pub fn run_benchmark<N: NuisanceEstimator + ?Sized>(
    cfg: &BenchmarkConfig,
    nuisance: &N,
) -> Result<(Vec<BenchmarkRow>, BenchmarkSummary)> {
    if cfg.reps == 0 {
        return Err(Error::Config("benchmark needs at least one repetition".into()));
    }
    let lambdas = lambda_grid(cfg.lambda_min, cfg.lambda_max, cfg.lambda_len, true)?;
    let [sig_a, sig_b] = cfg.dgp.tau_vars;
    let names: Vec<String> = (1..=cfg.dgp.p).map(|j| format!("x{j}")).collect();

    let mut rows = Vec::with_capacity(cfg.reps);
    let mut best_linear_values = Vec::new();
    let mut selection_counts = vec![0usize; cfg.dgp.p];
    let mut failures = 0usize;

    for rep in 0..cfg.reps {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(rep as u64));
        let rep_result = (|| -> Result<BenchmarkRow> {
            let (train, _train_oracle) = generate_n(&cfg.dgp, cfg.n_train, &mut rng)?;
            let (eval, eval_oracle) = generate_n(&cfg.dgp, cfg.n_eval, &mut rng)?;
            let fold_seed: u64 = rng.gen();

            let nd = normalize(train)?;
            let folds = kfold_split(nd.base.treatment.view(), cfg.k_folds, fold_seed)?;
            let cv = cv_path(&nd, &folds, &lambdas, &cfg.settings, nuisance, None)?;
            let lambda = match cfg.lambda_rule {
                LambdaRule::Min => cv.lambda_min,
                LambdaRule::OneSe => cv.lambda_1se,
            };
            let full = fit_full(&nd, lambda, &cfg.settings, cfg.prune_frac, nuisance, None)?;

            let eval_design = nd
                .standardizer
                .design_for(eval.covariates.view(), &names)?;
            let d = policy_assignments(eval_design.view(), full.policy.eta.view())?;
            let value = true_value(d.view(), &eval_oracle)?;
            let best_linear = true_value(eval_oracle.optimal.view(), &eval_oracle)?;
            let rep_ccr = ccr(d.view(), &eval_oracle)?;

            best_linear_values.push(best_linear);
            for &j in &full.policy.selected {
                selection_counts[j] += 1;
            }
            let false_positives = full
                .policy
                .selected
                .iter()
                .filter(|&&j| j != sig_a && j != sig_b)
                .count();
            Ok(BenchmarkRow {
                rep,
                value,
                value_ratio: value / best_linear,
                ccr: rep_ccr,
                n_selected: full.policy.selected.len() as f64,
                selected_x1: full.policy.selected.contains(&sig_a) as u8 as f64,
                selected_x2: full.policy.selected.contains(&sig_b) as u8 as f64,
                false_positives: false_positives as f64,
                converged: (full.fit.converged && full.refit_fit.converged) as u8 as f64,
            })
        })();
        match rep_result {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::warn!("benchmark repetition {rep} failed: {e}");
                failures += 1;
                rows.push(BenchmarkRow {
                    rep,
                    value: f64::NAN,
                    value_ratio: f64::NAN,
                    ccr: f64::NAN,
                    n_selected: f64::NAN,
                    selected_x1: f64::NAN,
                    selected_x2: f64::NAN,
                    false_positives: f64::NAN,
                    converged: 0.0,
                });
            }
        }
    }

    let ok_rows: Vec<&BenchmarkRow> = rows.iter().filter(|r| r.value.is_finite()).collect();
    let values: Vec<f64> = ok_rows.iter().map(|r| r.value).collect();
    let ratios: Vec<f64> = ok_rows.iter().map(|r| r.value_ratio).collect();
    let ccrs: Vec<f64> = ok_rows.iter().map(|r| r.ccr).collect();
    let n_sel: Vec<f64> = ok_rows.iter().map(|r| r.n_selected).collect();
    let (mean_value, sd_value) = mean_sd(&values);
    let (mean_value_ratio, _) = mean_sd(&ratios);
    let (mean_ccr, sd_ccr) = mean_sd(&ccrs);
    let (mean_n_selected, _) = mean_sd(&n_sel);
    let (mean_best_linear, _) = mean_sd(&best_linear_values);
    let denom = ok_rows.len().max(1) as f64;
    let selection_freq = names
        .iter()
        .zip(&selection_counts)
        .map(|(name, &c)| (name.clone(), c as f64 / denom))
        .collect();

    let summary = BenchmarkSummary {
        reps: cfg.reps,
        failures,
        mean_value,
        sd_value,
        mean_best_linear,
        mean_value_ratio,
        mean_ccr,
        sd_ccr,
        mean_n_selected,
        selection_freq,
    };
    Ok((rows, summary))
}
