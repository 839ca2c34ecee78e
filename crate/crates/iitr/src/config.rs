//! Run configuration: one file that drives data loading, policy fitting,
//! cross-validation, and the simulation benchmark.
//!
//! Configurations are TOML or JSON (chosen by file extension) and every
//! field has a default, so an empty file is a valid configuration. Unknown
//! keys are rejected rather than ignored — a typo should fail loudly, not
//! silently fall back to a default. A SHA-256 hash of the parsed
//! configuration is embedded in outputs so results can be traced back to
//! the exact settings that produced them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::TableSpec;
use crate::error::{Error, Result};
use crate::losses::SurrogateKind;
use crate::nuisance::GlmNuisance;
use crate::pipeline::{FitSettings, LambdaRule};
use crate::sim::{BenchmarkConfig, DgpConfig};
use crate::solvers::SolverConfig;

/// Column roles and parsing options for the input table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Name of the outcome column.
    pub outcome: String,
    /// Name of the 0/1 treatment column.
    pub treatment: String,
    /// Field delimiter (single character).
    pub delimiter: String,
    /// Columns to drop entirely (identifiers, notes, ...).
    pub drop: Vec<String>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            outcome: "y".into(),
            treatment: "a".into(),
            delimiter: ",".into(),
            drop: Vec::new(),
        }
    }
}

/// Policy-fitting options.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// Covariates kept out of the policy (still used by nuisance models).
    pub exclude: Vec<String>,
    /// Surrogate loss.
    pub loss: SurrogateKind,
    /// Adaptive penalty exponent.
    pub gamma: f64,
    /// Prune coefficients below this fraction of the largest one.
    pub prune_frac: f64,
    /// Which cross-validated lambda the final fit uses.
    pub lambda_rule: LambdaRule,
    /// Penalize the intercept too (off by default).
    pub penalize_intercept: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            exclude: Vec::new(),
            loss: SurrogateKind::Ramp,
            gamma: 1.0,
            prune_frac: 0.1,
            lambda_rule: LambdaRule::OneSe,
            penalize_intercept: false,
        }
    }
}

/// Cross-validation grid and fold count.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    /// Number of treatment-stratified folds.
    pub k: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Number of grid points.
    pub lambda_len: usize,
    /// Geometric (true) or linear (false) spacing.
    pub geometric: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 5,
            lambda_min: 1e-4,
            lambda_max: 10.0,
            lambda_len: 20,
            geometric: true,
        }
    }
}

/// Nuisance-model options for the built-in parametric estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuisanceConfig {
    /// Propensity clipping bounds `[low, high]`.
    pub clip: [f64; 2],
    /// Iteration cap for the logistic fit.
    pub irls_max_iter: usize,
    /// Relative log-likelihood tolerance for the logistic fit.
    pub irls_tol: f64,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        NuisanceConfig {
            clip: [0.01, 0.99],
            irls_max_iter: 100,
            irls_tol: 1e-10,
        }
    }
}

/// Benchmark options: repetition counts plus generator overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub reps: usize,
    pub n_train: usize,
    pub n_eval: usize,
    /// Number of covariates in the generator.
    pub p: usize,
    pub noise_sd: f64,
    pub propensity_intercept: f64,
    /// Propensity slopes (omit for the built-in pattern).
    pub propensity_slopes: Option<Vec<f64>>,
    pub mu0_intercept: f64,
    /// Control-arm slopes (omit for the built-in pattern).
    pub mu0_slopes: Option<Vec<f64>>,
    /// Zero-based indices of the two effect covariates.
    pub tau_vars: [usize; 2],
    pub tau_lower_root: f64,
    pub tau_upper_shift: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let d = DgpConfig::default();
        SimConfig {
            reps: 50,
            n_train: 3000,
            n_eval: 1000,
            p: d.p,
            noise_sd: d.noise_sd,
            propensity_intercept: d.propensity_intercept,
            propensity_slopes: d.propensity_slopes,
            mu0_intercept: d.mu0_intercept,
            mu0_slopes: d.mu0_slopes,
            tau_vars: d.tau_vars,
            tau_lower_root: d.tau_lower_root,
            tau_upper_shift: d.tau_upper_shift,
        }
    }
}

/// Everything a run needs, with defaults for every field.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed for fold splitting and simulation streams.
    pub seed: Option<u64>,
    pub data: DataConfig,
    pub policy: PolicyConfig,
    pub cv: CvConfig,
    pub nuisance: NuisanceConfig,
    pub solver: SolverConfig,
    pub sim: SimConfig,
}

/// Default base seed when neither the config nor the command line sets one.
pub const DEFAULT_SEED: u64 = 17;

impl RunConfig {
    /// Load from a TOML (`.toml`) or JSON (`.json`) file and validate.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        let cfg: RunConfig = match ext.as_str() {
            "toml" => toml::from_str(&text).map_err(|e| {
                Error::Config(format!("{}: {e}", path.display()))
            })?,
            "json" => serde_json::from_str(&text).map_err(|e| {
                Error::Config(format!("{}: {e}", path.display()))
            })?,
            other => {
                return Err(Error::Config(format!(
                    "unsupported config extension {other:?} (expected .toml or .json)"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check every field before any computation starts.
    pub fn validate(&self) -> Result<()> {
        if self.data.delimiter.as_bytes().len() != 1 {
            return Err(Error::Config(format!(
                "delimiter must be a single byte, got {:?}",
                self.data.delimiter
            )));
        }
        if self.data.outcome == self.data.treatment {
            return Err(Error::Config(
                "outcome and treatment columns must differ".into(),
            ));
        }
        if !(self.policy.gamma > 0.0) {
            return Err(Error::Config(format!(
                "gamma must be positive, got {}",
                self.policy.gamma
            )));
        }
        if !(0.0..1.0).contains(&self.policy.prune_frac) {
            return Err(Error::Config(format!(
                "prune_frac must lie in [0, 1), got {}",
                self.policy.prune_frac
            )));
        }
        if self.cv.k < 2 {
            return Err(Error::Config(format!(
                "cross-validation needs at least 2 folds, got {}",
                self.cv.k
            )));
        }
        // Validates the grid bounds as a side effect.
        crate::pipeline::lambda_grid(
            self.cv.lambda_min,
            self.cv.lambda_max,
            self.cv.lambda_len,
            self.cv.geometric,
        )?;
        let [lo, hi] = self.nuisance.clip;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::Config(format!(
                "propensity clip bounds must satisfy 0 < low < high < 1, got [{lo}, {hi}]"
            )));
        }
        if self.nuisance.irls_max_iter == 0 {
            return Err(Error::Config("irls_max_iter must be positive".into()));
        }
        if !(self.nuisance.irls_tol > 0.0) {
            return Err(Error::Config(format!(
                "irls_tol must be positive, got {}",
                self.nuisance.irls_tol
            )));
        }
        self.solver.validate()?;
        if self.sim.reps == 0 {
            return Err(Error::Config("sim.reps must be positive".into()));
        }
        if self.sim.n_train < 2 || self.sim.n_eval == 0 {
            return Err(Error::Config(
                "sim.n_train must be at least 2 and sim.n_eval positive".into(),
            ));
        }
        // Full generator validation (p, tau_vars, slope lengths).
        crate::sim::generate(&DgpConfig {
            n: 1,
            ..self.dgp_config(0)
        })
        .map(|_| ())?;
        Ok(())
    }

    /// Seed to use, preferring an explicit override, then the config file.
    pub fn effective_seed(&self, override_seed: Option<u64>) -> u64 {
        override_seed.or(self.seed).unwrap_or(DEFAULT_SEED)
    }

    /// Table-parsing options for [`crate::dataset::load_table`].
    pub fn table_spec(&self) -> TableSpec {
        TableSpec {
            outcome: self.data.outcome.clone(),
            treatment: self.data.treatment.clone(),
            delimiter: self.data.delimiter.as_bytes()[0],
            drop: self.data.drop.clone(),
        }
    }

    /// Loss, penalty exponent, and solver controls for the pipeline.
    pub fn fit_settings(&self) -> FitSettings {
        FitSettings {
            loss: self.policy.loss,
            gamma: self.policy.gamma,
            penalize_intercept: self.policy.penalize_intercept,
            solver: self.solver.clone(),
        }
    }

    /// The built-in parametric nuisance estimator with configured options.
    pub fn glm_nuisance(&self) -> GlmNuisance {
        GlmNuisance {
            clip: (self.nuisance.clip[0], self.nuisance.clip[1]),
            irls_max_iter: self.nuisance.irls_max_iter,
            irls_tol: self.nuisance.irls_tol,
        }
    }

    /// The cross-validation penalty grid.
    pub fn lambda_grid(&self) -> Result<Vec<f64>> {
        crate::pipeline::lambda_grid(
            self.cv.lambda_min,
            self.cv.lambda_max,
            self.cv.lambda_len,
            self.cv.geometric,
        )
    }

    /// Generator settings for one simulated dataset of size `n`.
    fn dgp_config(&self, seed: u64) -> DgpConfig {
        DgpConfig {
            n: self.sim.n_train,
            p: self.sim.p,
            seed,
            noise_sd: self.sim.noise_sd,
            propensity_intercept: self.sim.propensity_intercept,
            propensity_slopes: self.sim.propensity_slopes.clone(),
            mu0_intercept: self.sim.mu0_intercept,
            mu0_slopes: self.sim.mu0_slopes.clone(),
            tau_vars: self.sim.tau_vars,
            tau_lower_root: self.sim.tau_lower_root,
            tau_upper_shift: self.sim.tau_upper_shift,
        }
    }

    /// Benchmark settings assembled from the `[sim]`, `[cv]`, `[policy]`,
    /// and `[solver]` sections.
    pub fn benchmark_config(&self, override_seed: Option<u64>) -> BenchmarkConfig {
        BenchmarkConfig {
            reps: self.sim.reps,
            n_train: self.sim.n_train,
            n_eval: self.sim.n_eval,
            seed: self.effective_seed(override_seed),
            dgp: self.dgp_config(0),
            k_folds: self.cv.k,
            lambda_min: self.cv.lambda_min,
            lambda_max: self.cv.lambda_max,
            lambda_len: self.cv.lambda_len,
            lambda_rule: self.policy.lambda_rule,
            prune_frac: self.policy.prune_frac,
            settings: self.fit_settings(),
        }
    }

    /// SHA-256 of the canonical (JSON) form of this configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_temp(ext: &str, contents: &str) -> tempfile::TempPath {
        let mut f = tempfile::Builder::new()
            .suffix(&format!(".{ext}"))
            .tempfile()
            .unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.into_temp_path()
    }

    #[test]
    fn empty_toml_is_all_defaults() {
        let path = write_temp("toml", "");
        let cfg = RunConfig::load(Path::new(&*path)).unwrap();
        assert_eq!(cfg.data.outcome, "y");
        assert_eq!(cfg.cv.k, 5);
        assert_eq!(cfg.policy.loss, SurrogateKind::Ramp);
        assert_eq!(cfg.policy.lambda_rule, LambdaRule::OneSe);
        assert_eq!(cfg.effective_seed(None), DEFAULT_SEED);
        assert_eq!(cfg.effective_seed(Some(5)), 5);
    }

    #[test]
    fn toml_sections_round_trip() {
        let path = write_temp(
            "toml",
            r#"
            seed = 99

            [data]
            outcome = "response"
            treatment = "arm"
            drop = ["id"]

            [policy]
            loss = "hinge"
            gamma = 2.0
            lambda_rule = "min"
            exclude = ["x7"]

            [cv]
            k = 3
            lambda_len = 5

            [sim]
            reps = 4
            p = 6
            "#,
        );
        let cfg = RunConfig::load(Path::new(&*path)).unwrap();
        assert_eq!(cfg.seed, Some(99));
        assert_eq!(cfg.data.outcome, "response");
        assert_eq!(cfg.data.drop, vec!["id".to_string()]);
        assert_eq!(cfg.policy.loss, SurrogateKind::Hinge);
        assert_eq!(cfg.policy.lambda_rule, LambdaRule::Min);
        assert_eq!(cfg.cv.k, 3);
        assert_eq!(cfg.sim.p, 6);
        let bench = cfg.benchmark_config(None);
        assert_eq!(bench.seed, 99);
        assert_eq!(bench.reps, 4);
        assert_eq!(bench.dgp.p, 6);
    }

    #[test]
    fn json_works_too() {
        let path = write_temp("json", r#"{"cv": {"k": 4}}"#);
        let cfg = RunConfig::load(Path::new(&*path)).unwrap();
        assert_eq!(cfg.cv.k, 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let path = write_temp("toml", "[policy]\nlamda = 3.0\n");
        assert!(matches!(
            RunConfig::load(Path::new(&*path)),
            Err(Error::Config(_))
        ));
        let path = write_temp("toml", "verbose = true\n");
        assert!(RunConfig::load(Path::new(&*path)).is_err());
    }

    #[test]
    fn invalid_values_are_rejected_before_compute() {
        for bad in [
            "[policy]\ngamma = 0.0\n",
            "[policy]\nprune_frac = 1.0\n",
            "[cv]\nk = 1\n",
            "[cv]\nlambda_min = 0.0\n",
            "[nuisance]\nclip = [0.5, 0.4]\n",
            "[data]\ndelimiter = \"ab\"\n",
            "[sim]\ntau_vars = [0, 0]\n",
            "[sim]\np = 1\n",
        ] {
            let path = write_temp("toml", bad);
            assert!(
                RunConfig::load(Path::new(&*path)).is_err(),
                "config should be rejected: {bad}"
            );
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.cv.k = 7;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn unsupported_extension_is_an_error() {
        let path = write_temp("yaml", "k: 3");
        assert!(RunConfig::load(Path::new(&*path)).is_err());
    }
}
