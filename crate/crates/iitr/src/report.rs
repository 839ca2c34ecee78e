//! Output files: the policy archive, CSV tables, and the benchmark summary.
//!
//! Every writer here is deterministic — identical inputs produce identical
//! bytes, with no timestamps, hostnames, or locale-dependent formatting.
//! Floating-point numbers in CSV output are printed with 12 significant
//! digits (scientific notation) so round-tripping is stable; counts are
//! printed as integers; NaN prints as `NaN`. JSON files serialize non-finite
//! numbers as `null` (serde_json's convention).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::dataset::Standardizer;
use crate::error::{Error, Result};
use crate::losses::SurrogateKind;
use crate::pipeline::{CVResult, FullFit, LambdaRule, Policy, ValueCurve};
use crate::sim::{BenchmarkRow, BenchmarkSummary};
use crate::solvers::FitResult;

/// Format a float with 12 significant digits; NaN prints as `NaN`.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.11e}")
    }
}

/// Format a count stored as f64: integer when finite, `NaN` otherwise.
fn fmt_count(v: f64) -> String {
    if v.is_finite() {
        format!("{}", v as i64)
    } else {
        "NaN".to_string()
    }
}

/// One coefficient of the stored policy, on both scales.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientEntry {
    /// Covariate name, or `(intercept)` for the leading entry.
    pub name: String,
    /// Coefficient on the standardized scale the policy was fit on.
    pub normalized: f64,
    /// Equivalent coefficient for raw (unstandardized) covariates.
    pub raw: f64,
}

/// The cross-validated penalty choices recorded alongside a policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvChoice {
    pub lambda_min: f64,
    pub lambda_1se: f64,
}

/// A fitted policy with everything needed to apply it elsewhere:
/// coefficients on both scales, the standardization parameters, the
/// penalty bookkeeping, and a hash of the configuration that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyFile {
    pub loss: SurrogateKind,
    pub lambda_used: f64,
    pub lambda_rule: LambdaRule,
    /// Whether coefficients come from the pruned-and-refit step.
    pub refit: bool,
    /// SHA-256 of the run configuration.
    pub config_hash: String,
    pub cv: CvChoice,
    /// Names of the covariates the policy retained.
    pub selected: Vec<String>,
    /// Intercept first, then one entry per covariate in data order.
    pub coefficients: Vec<CoefficientEntry>,
    /// Pre-prune penalized coefficients (standardized scale), used to rank
    /// variables in the complementary analysis.
    pub eta_full: Vec<f64>,
    /// Standardization parameters the coefficients refer to.
    pub standardizer: Standardizer,
}

impl PolicyFile {
    /// Assemble the archive for a completed fit.
    pub fn from_fit(
        full: &FullFit,
        standardizer: &Standardizer,
        cv: CvChoice,
        lambda_rule: LambdaRule,
        config_hash: String,
    ) -> Result<PolicyFile> {
        let raw = standardizer.raw_scale_coefficients(full.policy.eta.view())?;
        let mut coefficients = Vec::with_capacity(raw.len());
        coefficients.push(CoefficientEntry {
            name: "(intercept)".to_string(),
            normalized: full.policy.eta[0],
            raw: raw[0],
        });
        for (j, name) in standardizer.names.iter().enumerate() {
            coefficients.push(CoefficientEntry {
                name: name.clone(),
                normalized: full.policy.eta[j + 1],
                raw: raw[j + 1],
            });
        }
        let selected = full
            .policy
            .selected
            .iter()
            .map(|&j| standardizer.names[j].clone())
            .collect();
        Ok(PolicyFile {
            loss: full.policy.loss,
            lambda_used: full.policy.lambda_used,
            lambda_rule,
            refit: full.policy.refit,
            config_hash,
            cv,
            selected,
            coefficients,
            eta_full: full.eta_full.to_vec(),
            standardizer: standardizer.clone(),
        })
    }

    /// Rebuild the in-memory policy (standardized scale).
    pub fn to_policy(&self) -> Result<Policy> {
        let p = self.standardizer.names.len();
        if self.coefficients.len() != p + 1 {
            return Err(Error::Invalid(format!(
                "policy file has {} coefficients for {} covariates",
                self.coefficients.len(),
                p
            )));
        }
        let eta = Array1::from_iter(self.coefficients.iter().map(|c| c.normalized));
        let mut selected = Vec::with_capacity(self.selected.len());
        for name in &self.selected {
            let j = self
                .standardizer
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))?;
            selected.push(j);
        }
        selected.sort_unstable();
        Ok(Policy {
            eta,
            selected,
            loss: self.loss,
            lambda_used: self.lambda_used,
            refit: self.refit,
        })
    }

    /// Pre-prune coefficient vector for the complementary analysis.
    pub fn eta_full_array(&self) -> Array1<f64> {
        Array1::from_vec(self.eta_full.clone())
    }

    /// Write as pretty-printed JSON.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)
            .map_err(|e| Error::Computation(format!("serializing policy: {e}")))?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    /// Read a policy archive back.
    pub fn read(path: &Path) -> Result<PolicyFile> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: format!("not a valid policy file: {e}"),
        })
    }
}

/// A single solver fit in plain JSON form: coefficients keyed by variable
/// name, the objective trace, and the convergence flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    /// Coefficient per variable; the leading intercept is `(intercept)`.
    pub coefficients: BTreeMap<String, f64>,
    pub final_objective: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

impl FitReport {
    /// Pair a fit's coefficients with their variable names. `names` lists
    /// the covariates in design order; the fit must carry one more
    /// coefficient (the intercept) than there are names.
    pub fn new(fit: &FitResult, names: &[String]) -> Result<FitReport> {
        if fit.eta.len() != names.len() + 1 {
            return Err(Error::Invalid(format!(
                "fit has {} coefficients but {} covariate names were given",
                fit.eta.len(),
                names.len()
            )));
        }
        let mut coefficients = BTreeMap::new();
        coefficients.insert("(intercept)".to_string(), fit.eta[0]);
        for (j, name) in names.iter().enumerate() {
            coefficients.insert(name.clone(), fit.eta[j + 1]);
        }
        Ok(FitReport {
            coefficients,
            final_objective: fit.final_objective,
            outer_iterations: fit.outer_iterations,
            converged: fit.converged,
            objective_trace: fit.objective_trace.clone(),
        })
    }

    /// Pretty-printed JSON.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Computation(format!("serializing fit report: {e}")))
    }
}

/// Write the cross-validation path: `lambda,mean_value,se_value`.
pub fn write_cv_csv(path: &Path, cv: &CVResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["lambda", "mean_value", "se_value"])
        .map_err(csv_err)?;
    for i in 0..cv.lambdas.len() {
        w.write_record([
            fmt_sig(cv.lambdas[i]),
            fmt_sig(cv.mean_value[i]),
            fmt_sig(cv.se_value[i]),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Write the value-vs-sparsity curve:
/// `k,added_variable,value,ci_lower,ci_upper`.
pub fn write_value_curve_csv(path: &Path, curve: &ValueCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["k", "added_variable", "value", "ci_lower", "ci_upper"])
        .map_err(csv_err)?;
    for pt in &curve.points {
        w.write_record([
            pt.k.to_string(),
            pt.added.clone().unwrap_or_default(),
            fmt_sig(pt.value),
            fmt_sig(pt.ci_lower),
            fmt_sig(pt.ci_upper),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Write per-repetition benchmark rows.
pub fn write_benchmark_csv(path: &Path, rows: &[BenchmarkRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "rep",
        "value",
        "value_ratio",
        "ccr",
        "n_selected",
        "selected_x1",
        "selected_x2",
        "false_positives",
        "converged",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.rep.to_string(),
            fmt_sig(r.value),
            fmt_sig(r.value_ratio),
            fmt_sig(r.ccr),
            fmt_count(r.n_selected),
            fmt_count(r.selected_x1),
            fmt_count(r.selected_x2),
            fmt_count(r.false_positives),
            fmt_count(r.converged),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Computation(format!("writing csv: {e}"))
}

/// Selection frequency of one covariate across benchmark repetitions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionFrequency {
    pub name: String,
    pub frequency: f64,
}

/// Benchmark aggregates written as `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryFile {
    pub config_hash: String,
    pub seed: u64,
    pub reps: usize,
    pub failures: usize,
    pub mean_value: f64,
    pub sd_value: f64,
    /// Mean value of the optimal rule across evaluation draws.
    pub mean_best_linear: f64,
    pub mean_value_ratio: f64,
    pub mean_ccr: f64,
    pub sd_ccr: f64,
    pub mean_n_selected: f64,
    pub selection_freq: Vec<SelectionFrequency>,
}

impl SummaryFile {
    pub fn new(summary: &BenchmarkSummary, config_hash: String, seed: u64) -> SummaryFile {
        SummaryFile {
            config_hash,
            seed,
            reps: summary.reps,
            failures: summary.failures,
            mean_value: summary.mean_value,
            sd_value: summary.sd_value,
            mean_best_linear: summary.mean_best_linear,
            mean_value_ratio: summary.mean_value_ratio,
            mean_ccr: summary.mean_ccr,
            sd_ccr: summary.sd_ccr,
            mean_n_selected: summary.mean_n_selected,
            selection_freq: summary
                .selection_freq
                .iter()
                .map(|(name, frequency)| SelectionFrequency {
                    name: name.clone(),
                    frequency: *frequency,
                })
                .collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)
            .map_err(|e| Error::Computation(format!("serializing summary: {e}")))?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }
}
