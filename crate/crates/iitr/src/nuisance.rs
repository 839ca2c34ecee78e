//! Nuisance models and doubly robust estimation of contrasts and policy value.
//!
//! The policy learner never touches outcomes directly; it consumes per-unit
//! quantities derived from two nuisance models:
//!
//! * a propensity model `e(x) = P(A = 1 | X = x)` — logistic regression fit
//!   by iteratively reweighted least squares (IRLS);
//! * arm-specific outcome models `mu(x; a) = E[Y | X = x, A = a]` — ordinary
//!   least squares within each arm.
//!
//! From their predictions, [`estimate_contrast_aipw`] forms the augmented
//! inverse-probability-weighted contrast per unit
//!
//! ```text
//! tau_i = A_i (Y_i - mu1_i) / e_i - (1 - A_i)(Y_i - mu0_i) / (1 - e_i) + mu1_i - mu0_i
//! ```
//!
//! which is unbiased for `E[Y(1) - Y(0) | X]` when either nuisance model is
//! correct, and [`estimate_value_aipw`] scores a treatment assignment `d` via
//!
//! ```text
//! V = (1/n) sum_i { W_i (Y_i - mu_i^d) + mu_i^d },
//! W_i = A_i d_i / e_i + (1 - A_i)(1 - d_i) / (1 - e_i),
//! ```
//!
//! with `mu_i^d` the predicted outcome under the assigned arm. The augmented
//! term enters as `+ mu_i^d` so that the estimator stays consistent when the
//! outcome model is right but the propensity model is not (and vice versa);
//! its variance is the empirical variance of the per-unit contributions over
//! `n^2`, giving the usual `value +/- 1.96 * sqrt(variance)` interval.
//!
//! Anything that can produce `(e, mu0, mu1)` vectors can stand in for the
//! built-in GLMs through the [`NuisanceEstimator`] trait, which is what the
//! cross-validation pipeline consumes.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_wls;

/// Coefficient norm beyond which the propensity fit is declared separated.
const SEPARATION_NORM: f64 = 1e3;

/// Floor for IRLS working weights, guarding the normal equations against
/// exactly-saturated probabilities.
const IRLS_WEIGHT_FLOOR: f64 = 1e-10;

/// Critical value for 95% confidence intervals.
const Z_95: f64 = 1.96;

/// Numerically stable logistic function.
fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli log-likelihood of labels `a` under margins `m = X b`.
fn log_likelihood(margins: &Array1<f64>, a: ArrayView1<f64>) -> f64 {
    let mut ll = 0.0;
    for (i, &m) in margins.iter().enumerate() {
        // ln(1 + e^m) = max(m, 0) + ln(1 + e^{-|m|})
        ll += a[i] * m - (m.max(0.0) + (-m.abs()).exp().ln_1p());
    }
    ll
}

/// Logistic propensity model fit by IRLS.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropensityModel {
    /// Coefficients aligned with the design columns.
    pub coef: Array1<f64>,
    /// IRLS iterations used.
    pub iterations: usize,
}

impl PropensityModel {
    /// Fit by IRLS. Converged when the relative log-likelihood change drops
    /// below `tol`; errors on non-convergence and on (quasi-)separation,
    /// detected as the coefficient norm diverging past 1e3.
    pub fn fit(
        design: ArrayView2<f64>,
        treatment: ArrayView1<f64>,
        max_iter: usize,
        tol: f64,
    ) -> Result<Self> {
        let n = design.nrows();
        let p = design.ncols();
        if treatment.len() != n {
            return Err(Error::Invalid(format!(
                "propensity fit: {} rows but {} treatments",
                n,
                treatment.len()
            )));
        }
        if n <= p {
            return Err(Error::Invalid(format!(
                "propensity fit: {n} rows for {p} columns"
            )));
        }
        for (i, &a) in treatment.iter().enumerate() {
            if a != 0.0 && a != 1.0 {
                return Err(Error::InvalidTreatment { row: i + 1, value: a });
            }
        }

        let mut margins = Array1::<f64>::zeros(n);
        let mut ll_old = log_likelihood(&margins, treatment);
        for iter in 1..=max_iter {
            let mut w = Array1::<f64>::zeros(n);
            let mut z = Array1::<f64>::zeros(n);
            for i in 0..n {
                let pi = sigmoid(margins[i]);
                let wi = (pi * (1.0 - pi)).max(IRLS_WEIGHT_FLOOR);
                w[i] = wi;
                z[i] = margins[i] + (treatment[i] - pi) / wi;
            }
            let beta = solve_wls(design, z.view(), w.view(), " in propensity fit")?;
            let norm = beta.dot(&beta).sqrt();
            if norm > SEPARATION_NORM {
                return Err(Error::Separation {
                    norm,
                    limit: SEPARATION_NORM,
                });
            }
            margins = design.dot(&beta);
            let ll = log_likelihood(&margins, treatment);
            if (ll - ll_old).abs() <= tol * (ll_old.abs() + 1e-10) {
                return Ok(PropensityModel { coef: beta, iterations: iter });
            }
            ll_old = ll;
        }
        Err(Error::NoConvergence {
            what: "propensity IRLS".into(),
            iterations: max_iter,
        })
    }

    /// Fitted probabilities on any design with matching columns (unclipped).
    pub fn predict(&self, design: ArrayView2<f64>) -> Result<Array1<f64>> {
        if design.ncols() != self.coef.len() {
            return Err(Error::Invalid(format!(
                "propensity predict: {} columns but model has {} coefficients",
                design.ncols(),
                self.coef.len()
            )));
        }
        Ok(design.dot(&self.coef).mapv(sigmoid))
    }
}

/// Arm-specific linear outcome models fit by OLS.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeModel {
    /// Coefficients for the control arm (A = 0).
    pub coef_control: Array1<f64>,
    /// Coefficients for the treated arm (A = 1).
    pub coef_treated: Array1<f64>,
}

impl OutcomeModel {
    /// Fit OLS within each arm. Each arm must hold strictly more units than
    /// the design has columns; a rank-deficient within-arm design is an error
    /// naming the dependent column.
    pub fn fit(
        design: ArrayView2<f64>,
        treatment: ArrayView1<f64>,
        outcome: ArrayView1<f64>,
    ) -> Result<Self> {
        let n = design.nrows();
        let p = design.ncols();
        if treatment.len() != n || outcome.len() != n {
            return Err(Error::Invalid(format!(
                "outcome fit: {} rows, {} treatments, {} outcomes",
                n,
                treatment.len(),
                outcome.len()
            )));
        }
        let mut coefs = [Array1::<f64>::zeros(p), Array1::<f64>::zeros(p)];
        for arm in 0..2usize {
            let target = arm as f64;
            let mut w = Array1::<f64>::zeros(n);
            let mut count = 0usize;
            for i in 0..n {
                if treatment[i] == target {
                    w[i] = 1.0;
                    count += 1;
                }
            }
            if count <= p {
                return Err(Error::Invalid(format!(
                    "outcome fit: arm {arm} has {count} units for {p} design columns"
                )));
            }
            coefs[arm] = solve_wls(
                design,
                outcome,
                w.view(),
                &format!(" within arm {arm}"),
            )?;
        }
        let [coef_control, coef_treated] = coefs;
        Ok(OutcomeModel {
            coef_control,
            coef_treated,
        })
    }

    /// Predicted `(mu0, mu1)` on any design with matching columns.
    pub fn predict(&self, design: ArrayView2<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        if design.ncols() != self.coef_control.len() {
            return Err(Error::Invalid(format!(
                "outcome predict: {} columns but model has {} coefficients",
                design.ncols(),
                self.coef_control.len()
            )));
        }
        Ok((design.dot(&self.coef_control), design.dot(&self.coef_treated)))
    }
}

/// Clamp fitted propensities into `[lo, hi]`; requires `0 < lo < hi < 1`.
pub fn clip_propensity(e: ArrayView1<f64>, lo: f64, hi: f64) -> Result<Array1<f64>> {
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(Error::Invalid(format!(
            "clip bounds must satisfy 0 < lo < hi < 1, got ({lo}, {hi})"
        )));
    }
    Ok(e.mapv(|v| v.clamp(lo, hi)))
}

/// Per-unit nuisance predictions: clipped propensity and both arm means.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuisanceFit {
    /// `P(A = 1 | X)` per unit, strictly inside (0, 1).
    pub propensity: Array1<f64>,
    /// Predicted outcome under control per unit.
    pub mu0: Array1<f64>,
    /// Predicted outcome under treatment per unit.
    pub mu1: Array1<f64>,
}

impl NuisanceFit {
    /// Validate internal consistency: equal lengths and propensities strictly
    /// inside the unit interval.
    pub fn validate(&self) -> Result<()> {
        let n = self.propensity.len();
        if self.mu0.len() != n || self.mu1.len() != n {
            return Err(Error::Invalid(format!(
                "nuisance fit lengths differ: {} propensities, {} mu0, {} mu1",
                n,
                self.mu0.len(),
                self.mu1.len()
            )));
        }
        for &e in self.propensity.iter() {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Invalid(format!(
                    "propensity {e} outside (0, 1); clip before estimation"
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.propensity.len()
    }
}

/// Fitted nuisances usable on new rows (test folds, evaluation samples).
pub trait NuisancePredictor {
    /// Predict `(e, mu0, mu1)` for every row of `design`. Propensities must
    /// come back strictly inside (0, 1) — clipping is the predictor's job.
    fn predict(&self, design: ArrayView2<f64>) -> Result<NuisanceFit>;
}

/// A recipe for fitting nuisance models on training rows.
///
/// The pipeline is generic over this trait, so alternative nuisance
/// estimators (different functional forms, externally fitted predictions)
/// plug in without touching the policy-learning code.
pub trait NuisanceEstimator {
    fn fit(
        &self,
        design: ArrayView2<f64>,
        treatment: ArrayView1<f64>,
        outcome: ArrayView1<f64>,
    ) -> Result<Box<dyn NuisancePredictor>>;
}

/// Default nuisance recipe: IRLS logistic propensity + per-arm OLS outcomes,
/// with fitted propensities clipped into `clip`.
#[derive(Debug, Clone)]
pub struct GlmNuisance {
    /// Clipping bounds for fitted propensities.
    pub clip: (f64, f64),
    /// IRLS iteration cap.
    pub irls_max_iter: usize,
    /// IRLS relative log-likelihood tolerance.
    pub irls_tol: f64,
}

impl Default for GlmNuisance {
    fn default() -> Self {
        GlmNuisance {
            clip: (0.01, 0.99),
            irls_max_iter: 100,
            irls_tol: 1e-10,
        }
    }
}

/// Fitted GLM nuisances.
pub struct FittedGlm {
    pub propensity: PropensityModel,
    pub outcome: OutcomeModel,
    clip: (f64, f64),
}

impl NuisancePredictor for FittedGlm {
    fn predict(&self, design: ArrayView2<f64>) -> Result<NuisanceFit> {
        let e_raw = self.propensity.predict(design)?;
        let propensity = clip_propensity(e_raw.view(), self.clip.0, self.clip.1)?;
        let (mu0, mu1) = self.outcome.predict(design)?;
        let fit = NuisanceFit { propensity, mu0, mu1 };
        fit.validate()?;
        Ok(fit)
    }
}

impl NuisanceEstimator for GlmNuisance {
    fn fit(
        &self,
        design: ArrayView2<f64>,
        treatment: ArrayView1<f64>,
        outcome: ArrayView1<f64>,
    ) -> Result<Box<dyn NuisancePredictor>> {
        let propensity = PropensityModel::fit(design, treatment, self.irls_max_iter, self.irls_tol)?;
        let outcome = OutcomeModel::fit(design, treatment, outcome)?;
        Ok(Box::new(FittedGlm {
            propensity,
            outcome,
            clip: self.clip,
        }))
    }
}

/// Estimated per-unit treatment contrast with its classification encoding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContrastEstimate {
    /// Doubly robust contrast estimate per unit.
    pub tau: Array1<f64>,
    /// Classification labels `z_i = 2 * 1{tau_i > 0} - 1`; a tie at exactly
    /// zero maps to -1.
    pub labels: Array1<f64>,
    /// Classification weights `|tau_i|`.
    pub weights: Array1<f64>,
}

impl ContrastEstimate {
    /// Build the classification encoding from raw contrast values: labels
    /// `2 * 1{tau > 0} - 1` (ties at zero map to -1) and weights `|tau|`.
    pub fn from_tau(tau: Array1<f64>) -> Self {
        let labels = tau.mapv(|t| if t > 0.0 { 1.0 } else { -1.0 });
        let weights = tau.mapv(f64::abs);
        ContrastEstimate {
            tau,
            labels,
            weights,
        }
    }

    pub fn n(&self) -> usize {
        self.tau.len()
    }

    /// True when every weight is exactly zero (the weighted classification
    /// problem is degenerate).
    pub fn is_degenerate(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }
}

/// Doubly robust (AIPW) per-unit contrast estimates.
pub fn estimate_contrast_aipw(
    treatment: ArrayView1<f64>,
    outcome: ArrayView1<f64>,
    nf: &NuisanceFit,
) -> Result<ContrastEstimate> {
    nf.validate()?;
    let n = nf.n();
    if treatment.len() != n || outcome.len() != n {
        return Err(Error::Invalid(format!(
            "contrast: {} nuisance rows, {} treatments, {} outcomes",
            n,
            treatment.len(),
            outcome.len()
        )));
    }
    let mut tau = Array1::<f64>::zeros(n);
    for i in 0..n {
        let a = treatment[i];
        let y = outcome[i];
        let e = nf.propensity[i];
        tau[i] = a * (y - nf.mu1[i]) / e - (1.0 - a) * (y - nf.mu0[i]) / (1.0 - e)
            + nf.mu1[i]
            - nf.mu0[i];
    }
    Ok(ContrastEstimate::from_tau(tau))
}

/// Doubly robust value of a treatment assignment with a 95% interval.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ValueEstimate {
    /// Estimated mean outcome if everyone followed the assignment.
    pub value: f64,
    /// Estimated variance of `value`.
    pub variance: f64,
    /// `value - 1.96 * sqrt(variance)`.
    pub ci_lower: f64,
    /// `value + 1.96 * sqrt(variance)`.
    pub ci_upper: f64,
}

/// Doubly robust (AIPW) value of the assignment `d` (entries 0 or 1).
pub fn estimate_value_aipw(
    treatment: ArrayView1<f64>,
    outcome: ArrayView1<f64>,
    nf: &NuisanceFit,
    assignments: ArrayView1<f64>,
) -> Result<ValueEstimate> {
    nf.validate()?;
    let n = nf.n();
    if treatment.len() != n || outcome.len() != n || assignments.len() != n {
        return Err(Error::Invalid(format!(
            "value: {} nuisance rows, {} treatments, {} outcomes, {} assignments",
            n,
            treatment.len(),
            outcome.len(),
            assignments.len()
        )));
    }
    if n == 0 {
        return Err(Error::Invalid("value: empty input".into()));
    }
    let mut contributions = Array1::<f64>::zeros(n);
    for i in 0..n {
        let a = treatment[i];
        let d = assignments[i];
        if d != 0.0 && d != 1.0 {
            return Err(Error::Invalid(format!(
                "assignment {d} at row {} is not 0/1",
                i + 1
            )));
        }
        let e = nf.propensity[i];
        let w = a * d / e + (1.0 - a) * (1.0 - d) / (1.0 - e);
        let mu_d = d * nf.mu1[i] + (1.0 - d) * nf.mu0[i];
        contributions[i] = w * (outcome[i] - mu_d) + mu_d;
    }
    let value = contributions.sum() / n as f64;
    let variance = contributions
        .iter()
        .map(|c| (c - value) * (c - value))
        .sum::<f64>()
        / (n as f64 * n as f64);
    let half = Z_95 * variance.sqrt();
    Ok(ValueEstimate {
        value,
        variance,
        ci_lower: value - half,
        ci_upper: value + half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn nf(e: Vec<f64>, mu0: Vec<f64>, mu1: Vec<f64>) -> NuisanceFit {
        NuisanceFit {
            propensity: Array1::from(e),
            mu0: Array1::from(mu0),
            mu1: Array1::from(mu1),
        }
    }

    #[test]
    fn contrast_matches_hand_value() {
        // A=1, Y=3, e=0.5, mu1=2, mu0=1: (3-2)/0.5 + 2 - 1 = 3.
        let fit = nf(vec![0.5], vec![1.0], vec![2.0]);
        let c = estimate_contrast_aipw(array![1.0].view(), array![3.0].view(), &fit).unwrap();
        assert_abs_diff_eq!(c.tau[0], 3.0, epsilon = 1e-15);
        assert_eq!(c.labels[0], 1.0);
        assert_abs_diff_eq!(c.weights[0], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn contrast_reduces_to_model_difference_under_perfect_outcome_model() {
        // When mu(X; A) reproduces Y exactly, the residual terms vanish and
        // tau = mu1 - mu0 regardless of the propensity.
        let treatment = array![1.0, 0.0, 1.0];
        let mu0 = array![1.0, 2.0, -1.0];
        let mu1 = array![4.0, 2.5, 0.0];
        let outcome = array![4.0, 2.0, 0.0]; // Y = mu(X; A)
        let fit = nf(vec![0.3, 0.6, 0.85], mu0.to_vec(), mu1.to_vec());
        let c = estimate_contrast_aipw(treatment.view(), outcome.view(), &fit).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(c.tau[i], mu1[i] - mu0[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_contrast_gets_negative_label_and_zero_weight() {
        let fit = nf(vec![0.5], vec![2.0], vec![2.0]);
        let c = estimate_contrast_aipw(array![1.0].view(), array![2.0].view(), &fit).unwrap();
        assert_eq!(c.tau[0], 0.0);
        assert_eq!(c.labels[0], -1.0);
        assert_eq!(c.weights[0], 0.0);
        assert!(c.is_degenerate());
    }

    #[test]
    fn value_matches_two_unit_example() {
        // Unit 1: A=1, Y=3, e=0.5, mu1=2; unit 2: A=0, Y=1, mu1=2. Assign
        // both to treatment: contributions are 2*(3-2)+2 = 4 and 0 + 2 = 2,
        // so value = 3 and variance = (1/4)*((4-3)^2 + (2-3)^2) = 0.5.
        let fit = nf(vec![0.5, 0.5], vec![1.0, 1.0], vec![2.0, 2.0]);
        let v = estimate_value_aipw(
            array![1.0, 0.0].view(),
            array![3.0, 1.0].view(),
            &fit,
            array![1.0, 1.0].view(),
        )
        .unwrap();
        assert_abs_diff_eq!(v.value, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.variance, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v.ci_lower, 3.0 - 1.96 * 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(v.ci_upper, 3.0 + 1.96 * 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn value_reduces_to_mean_outcome_when_following_the_data() {
        // d = A and mu(X; A) = Y exactly: every contribution is Y_i.
        let treatment = array![1.0, 0.0, 0.0, 1.0];
        let outcome = array![2.0, -1.0, 0.5, 3.0];
        let mu0 = array![9.0, -1.0, 0.5, 9.0];
        let mu1 = array![2.0, 9.0, 9.0, 3.0];
        let fit = nf(vec![0.4, 0.4, 0.7, 0.2], mu0.to_vec(), mu1.to_vec());
        let v = estimate_value_aipw(treatment.view(), outcome.view(), &fit, treatment.view())
            .unwrap();
        assert_abs_diff_eq!(v.value, outcome.sum() / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn value_variance_is_never_negative() {
        let fit = nf(vec![0.5, 0.5], vec![1.0, 1.0], vec![1.0, 1.0]);
        let v = estimate_value_aipw(
            array![1.0, 0.0].view(),
            array![1.0, 1.0].view(),
            &fit,
            array![0.0, 0.0].view(),
        )
        .unwrap();
        assert!(v.variance >= 0.0);
    }

    #[test]
    fn clip_clamps_and_validates_bounds() {
        let e = array![0.001, 0.5, 0.9999];
        let c = clip_propensity(e.view(), 0.01, 0.99).unwrap();
        assert_eq!(c, array![0.01, 0.5, 0.99]);
        assert!(clip_propensity(e.view(), 0.99, 0.01).is_err());
        assert!(clip_propensity(e.view(), 0.0, 0.5).is_err());
    }

    #[test]
    fn propensity_intercept_only_recovers_treated_share() {
        // 60% treated: fitted probability must be 0.6 everywhere.
        let n = 10;
        let design = Array2::<f64>::ones((n, 1));
        let mut a = vec![1.0; 6];
        a.extend(vec![0.0; 4]);
        let treatment = Array1::from(a);
        let model = PropensityModel::fit(design.view(), treatment.view(), 100, 1e-10).unwrap();
        let fitted = model.predict(design.view()).unwrap();
        for &e in fitted.iter() {
            assert_abs_diff_eq!(e, 0.6, epsilon = 1e-6);
        }
    }

    #[test]
    fn propensity_recovers_half_under_independence() {
        // Treatment independent of covariates: fitted probabilities stay
        // near 1/2 at n = 5000.
        let n = 5000;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut design = Array2::<f64>::ones((n, 4));
        for i in 0..n {
            for j in 1..4 {
                design[[i, j]] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let treatment =
            Array1::from((0..n).map(|_| if rng.gen::<f64>() < 0.5 { 1.0 } else { 0.0 }).collect::<Vec<_>>());
        let model = PropensityModel::fit(design.view(), treatment.view(), 100, 1e-10).unwrap();
        let fitted = model.predict(design.view()).unwrap();
        let mean = fitted.mean().unwrap();
        assert!((0.48..=0.52).contains(&mean), "mean fitted propensity {mean}");
        for &e in fitted.iter() {
            assert!((0.40..=0.60).contains(&e), "fitted propensity {e} strayed from 1/2");
        }
    }

    #[test]
    fn propensity_detects_separation() {
        // Treatment is a deterministic threshold of x. The covariates sit
        // close to the boundary (min |x| = 1/156), so the slope must grow
        // past the norm limit to saturate their margins, and the fit fails
        // with a separation diagnostic rather than stalling.
        let n = 40;
        let mut design = Array2::<f64>::ones((n, 2));
        let mut treatment = Array1::<f64>::zeros(n);
        for i in 0..n {
            let x = (i as f64 - 19.5) / 78.0; // symmetric in [-1/4, 1/4]
            design[[i, 1]] = x;
            treatment[i] = if x > 0.0 { 1.0 } else { 0.0 };
        }
        match PropensityModel::fit(design.view(), treatment.view(), 500, 1e-10) {
            Err(Error::Separation { norm, .. }) => assert!(norm > 1e3),
            other => panic!("expected separation, got {other:?}"),
        }
    }

    #[test]
    fn outcome_model_recovers_linear_truth() {
        let n = 12;
        let mut design = Array2::<f64>::ones((n, 2));
        let mut treatment = Array1::<f64>::zeros(n);
        let mut outcome = Array1::<f64>::zeros(n);
        for i in 0..n {
            let x = i as f64 * 0.37 - 2.0;
            design[[i, 1]] = x;
            let a = if i % 2 == 0 { 1.0 } else { 0.0 };
            treatment[i] = a;
            // Control: y = 1 + 2x; treated: y = -1 + 0.5x (noiseless).
            outcome[i] = if a == 1.0 { -1.0 + 0.5 * x } else { 1.0 + 2.0 * x };
        }
        let model = OutcomeModel::fit(design.view(), treatment.view(), outcome.view()).unwrap();
        assert_abs_diff_eq!(model.coef_control[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(model.coef_control[1], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(model.coef_treated[0], -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(model.coef_treated[1], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn outcome_model_flags_duplicate_column() {
        let n = 10;
        let mut design = Array2::<f64>::ones((n, 3));
        for i in 0..n {
            let x = i as f64;
            design[[i, 1]] = x;
            design[[i, 2]] = x; // duplicate
        }
        let treatment = Array1::from((0..n).map(|i| (i % 2) as f64).collect::<Vec<_>>());
        let outcome = Array1::<f64>::zeros(n);
        match OutcomeModel::fit(design.view(), treatment.view(), outcome.view()) {
            Err(Error::RankDeficient { column, .. }) => assert_eq!(column, 2),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn outcome_model_requires_enough_units_per_arm() {
        let design = Array2::<f64>::ones((4, 2));
        let treatment = array![1.0, 1.0, 1.0, 0.0];
        let outcome = array![1.0, 2.0, 3.0, 4.0];
        assert!(matches!(
            OutcomeModel::fit(design.view(), treatment.view(), outcome.view()),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn value_rejects_unclipped_propensity() {
        let fit = nf(vec![1.0], vec![0.0], vec![0.0]);
        let r = estimate_value_aipw(
            array![1.0].view(),
            array![1.0].view(),
            &fit,
            array![1.0].view(),
        );
        assert!(r.is_err());
    }
}
