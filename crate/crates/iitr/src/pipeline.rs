//! End-to-end policy estimation: cross-validated penalty selection, pruning
//! and refitting, and the value-vs-sparsity curve.
//!
//! The flow mirrors how the pieces are meant to be used together:
//!
//! 1. [`cv_path`] — for every treatment-stratified fold, fit nuisances and
//!    contrasts on the training part, fit the penalized policy along a
//!    descending-lambda path with warm starts, and score each fit on the
//!    held-out fold by doubly robust value (held-out predictions come from
//!    the *training* fold's nuisance models). Per-lambda means and standard
//!    errors across folds pick `lambda_min` (best mean value) and
//!    `lambda_1se` (largest lambda within one standard error of the best).
//! 2. [`fit_full`] — refit on all data at the chosen lambda, prune
//!    coefficients below `prune_frac * max|coef|`, and refit the surviving
//!    variables unpenalized. The pruned-and-refit coefficients are the
//!    returned policy.
//! 3. [`complementary_analysis`] — rank variables by the size of their
//!    full-data penalized coefficient and fit unpenalized policies on the
//!    top-k sets, reporting value and confidence interval per k, so the cost
//!    of dropping variables is visible. The k = 0 entry is the better of the
//!    two trivial policies (treat everyone / no one).
//!
//! Variable exclusion lists apply to the policy design only: excluded
//! covariates still feed the nuisance models.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::dataset::{FoldAssignment, NormalizedDataset, Standardizer};
use crate::error::{Error, Result};
use crate::losses::{PenaltySpec, SurrogateKind};
use crate::nuisance::{
    estimate_contrast_aipw, estimate_value_aipw, ContrastEstimate, NuisanceEstimator, NuisanceFit,
    ValueEstimate,
};
use crate::solvers::{dc_fit, hinge_fit, initial_estimate, FitResult, SolverConfig};

/// Which cross-validated penalty the final fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LambdaRule {
    /// The lambda with the best mean held-out value.
    #[serde(rename = "min")]
    Min,
    /// The largest lambda within one standard error of the best (sparser).
    #[serde(rename = "1se")]
    OneSe,
}

impl std::fmt::Display for LambdaRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LambdaRule::Min => write!(f, "min"),
            LambdaRule::OneSe => write!(f, "1se"),
        }
    }
}

/// Knobs for a single policy fit, shared across the pipeline stages.
#[derive(Debug, Clone)]
pub struct FitSettings {
    /// Surrogate loss to minimize.
    pub loss: SurrogateKind,
    /// Adaptive penalty exponent.
    pub gamma: f64,
    /// Whether the intercept is penalized (off in the standard flow).
    pub penalize_intercept: bool,
    /// Iteration controls for the solvers.
    pub solver: SolverConfig,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            loss: SurrogateKind::Ramp,
            gamma: 1.0,
            penalize_intercept: false,
            solver: SolverConfig::default(),
        }
    }
}

/// Ascending penalty grid, geometric by default.
pub fn lambda_grid(min: f64, max: f64, len: usize, geometric: bool) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::Config("lambda grid length must be positive".into()));
    }
    if !(min > 0.0) && geometric {
        return Err(Error::Config(format!(
            "geometric lambda grid needs min > 0, got {min}"
        )));
    }
    if !(min >= 0.0) || !(max >= min) || !max.is_finite() {
        return Err(Error::Config(format!(
            "lambda grid needs 0 <= min <= max, got [{min}, {max}]"
        )));
    }
    if len == 1 {
        return Ok(vec![min]);
    }
    let mut grid = Vec::with_capacity(len);
    for i in 0..len {
        let t = i as f64 / (len - 1) as f64;
        let v = if geometric {
            min * (max / min).powf(t)
        } else {
            min + t * (max - min)
        };
        grid.push(v);
    }
    Ok(grid)
}

/// Treatment assignments of the linear rule: `1{x'eta > 0}`, ties to control.
pub fn policy_assignments(design: ArrayView2<f64>, eta: ArrayView1<f64>) -> Result<Array1<f64>> {
    if design.ncols() != eta.len() {
        return Err(Error::Invalid(format!(
            "assignments: {} design columns but {} coefficients",
            design.ncols(),
            eta.len()
        )));
    }
    Ok(design.dot(&eta).mapv(|s| if s > 0.0 { 1.0 } else { 0.0 }))
}

/// Cross-validation output along the penalty grid.
#[derive(Debug, Clone)]
pub struct CVResult {
    /// Penalty grid, ascending.
    pub lambdas: Vec<f64>,
    /// Mean held-out value per lambda (NaN when every fold failed).
    pub mean_value: Vec<f64>,
    /// Standard error (sd across folds / sqrt(#folds used)) per lambda.
    pub se_value: Vec<f64>,
    /// Folds that produced a value per lambda.
    pub folds_used: Vec<usize>,
    /// Held-out value per lambda and fold (`None` = excluded cell).
    pub fold_values: Vec<Vec<Option<f64>>>,
    /// Lambda attaining the best mean value (largest on ties).
    pub lambda_min: f64,
    /// Largest lambda whose mean value is within one SE of the best.
    pub lambda_1se: f64,
}

/// Pick `lambda_min` and `lambda_1se` from per-lambda summaries.
///
/// `lambda_min` attains the maximum mean value (the largest such lambda on
/// exact ties); `lambda_1se` is the largest lambda whose mean value is at
/// least `mean(lambda_min) - se(lambda_min)`. Entries with NaN mean (no
/// successful folds) are skipped; it is an error if none remain.
pub fn select_lambdas(lambdas: &[f64], means: &[f64], ses: &[f64]) -> Result<(f64, f64)> {
    if lambdas.len() != means.len() || lambdas.len() != ses.len() {
        return Err(Error::Invalid(format!(
            "select_lambdas: {} lambdas, {} means, {} ses",
            lambdas.len(),
            means.len(),
            ses.len()
        )));
    }
    let mut best: Option<usize> = None;
    for i in 0..lambdas.len() {
        if means[i].is_nan() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) if means[i] >= means[b] => Some(i),
            keep => keep,
        };
    }
    let best = best.ok_or_else(|| {
        Error::Computation("cross-validation produced no usable lambda (all folds failed)".into())
    })?;
    let threshold = means[best] - ses[best];
    let mut one_se = best;
    for i in 0..lambdas.len() {
        if means[i].is_nan() {
            continue;
        }
        if lambdas[i] > lambdas[one_se] && means[i] >= threshold {
            one_se = i;
        }
    }
    Ok((lambdas[best], lambdas[one_se]))
}

/// Design column indices available to the policy: intercept plus every
/// non-masked covariate. `mask[j] = false` hides covariate `j` from the
/// policy (nuisances always see everything).
fn policy_columns(p: usize, mask: Option<&[bool]>) -> Result<Vec<usize>> {
    let mut cols = vec![0usize];
    match mask {
        None => cols.extend(1..=p),
        Some(m) => {
            if m.len() != p {
                return Err(Error::Invalid(format!(
                    "policy mask has {} entries for {} covariates",
                    m.len(),
                    p
                )));
            }
            cols.extend((0..p).filter(|&j| m[j]).map(|j| j + 1));
            if cols.len() == 1 {
                return Err(Error::Invalid(
                    "policy mask excludes every covariate".into(),
                ));
            }
        }
    }
    Ok(cols)
}

/// One penalized fit of the configured surrogate with an explicit warm start.
fn fit_at(
    design: ArrayView2<f64>,
    contrast: &ContrastEstimate,
    spec: &PenaltySpec,
    warm: ArrayView1<f64>,
    settings: &FitSettings,
) -> Result<FitResult> {
    match settings.loss {
        SurrogateKind::Ramp => dc_fit(design, contrast, spec, warm, &settings.solver),
        SurrogateKind::Hinge => hinge_fit(design, contrast, spec, warm, &settings.solver),
    }
}

/// Unpenalized fit of the configured surrogate, seeded by weighted least
/// squares (the same construction as the adaptive-penalty reference).
fn unpenalized_fit(
    design: ArrayView2<f64>,
    contrast: &ContrastEstimate,
    settings: &FitSettings,
) -> Result<FitResult> {
    let eta = initial_estimate(design, contrast, settings.loss, &settings.solver)?;
    // initial_estimate returns only coefficients; rebuild the bookkeeping by
    // one more (cheap, already-converged) pass so callers get a FitResult.
    let spec = PenaltySpec::lasso(0.0);
    fit_at(design, contrast, &spec, eta.view(), settings)
}

/// Cross-validated held-out value along the penalty path.
///
/// Solver failures (errors or non-convergence) exclude the affected
/// (fold, lambda) cell from aggregation with a warning; nuisance failures
/// exclude the whole fold. See [`CVResult`] for what comes back.
pub fn cv_path<N: NuisanceEstimator + ?Sized>(
    nd: &NormalizedDataset,
    folds: &FoldAssignment,
    lambdas: &[f64],
    settings: &FitSettings,
    nuisance: &N,
    policy_mask: Option<&[bool]>,
) -> Result<CVResult> {
    settings.solver.validate()?;
    let n = nd.n();
    if folds.fold_index.len() != n {
        return Err(Error::Invalid(format!(
            "fold assignment covers {} units but the data has {}",
            folds.fold_index.len(),
            n
        )));
    }
    if lambdas.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    for w in lambdas.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Config("lambda grid must be strictly ascending".into()));
        }
    }
    if lambdas[0] < 0.0 {
        return Err(Error::Config("lambda must be non-negative".into()));
    }
    let cols = policy_columns(nd.p(), policy_mask)?;

    // cells[lambda][fold]
    let mut cells: Vec<Vec<Option<f64>>> = vec![vec![None; folds.k]; lambdas.len()];

    for fold in 0..folds.k {
        let (train, test) = folds.train_test(fold);
        let x_tr = nd.design.select(Axis(0), &train);
        let a_tr = nd.base.treatment.select(Axis(0), &train);
        let y_tr = nd.base.outcome.select(Axis(0), &train);
        let x_te = nd.design.select(Axis(0), &test);
        let a_te = nd.base.treatment.select(Axis(0), &test);
        let y_te = nd.base.outcome.select(Axis(0), &test);

        let fold_setup = || -> Result<(NuisanceFit, ContrastEstimate, Array1<f64>, Array2<f64>, Array2<f64>)> {
            let fitted = nuisance.fit(x_tr.view(), a_tr.view(), y_tr.view())?;
            let nf_tr = fitted.predict(x_tr.view())?;
            let nf_te = fitted.predict(x_te.view())?;
            let contrast = estimate_contrast_aipw(a_tr.view(), y_tr.view(), &nf_tr)?;
            let x_tr_pol = x_tr.select(Axis(1), &cols);
            let x_te_pol = x_te.select(Axis(1), &cols);
            let eta_int = initial_estimate(x_tr_pol.view(), &contrast, settings.loss, &settings.solver)?;
            Ok((nf_te, contrast, eta_int, x_tr_pol, x_te_pol))
        };
        let (nf_te, contrast, eta_int, x_tr_pol, x_te_pol) = match fold_setup() {
            Ok(v) => v,
            Err(e) => {
                log::warn!("fold {fold} excluded from cross-validation: {e}");
                continue;
            }
        };

        // Descending lambda with warm starts.
        let mut warm = eta_int.clone();
        for (li, &lambda) in lambdas.iter().enumerate().rev() {
            let spec = PenaltySpec {
                lambda,
                gamma: settings.gamma,
                eta_ref: Some(eta_int.clone()),
                penalize_intercept: settings.penalize_intercept,
            };
            match fit_at(x_tr_pol.view(), &contrast, &spec, warm.view(), settings) {
                Ok(fit) => {
                    warm = fit.eta.clone();
                    if !fit.converged {
                        log::warn!(
                            "fold {fold}, lambda {lambda:.6e}: solver did not converge; cell excluded"
                        );
                        continue;
                    }
                    let d = policy_assignments(x_te_pol.view(), fit.eta.view())?;
                    match estimate_value_aipw(a_te.view(), y_te.view(), &nf_te, d.view()) {
                        Ok(v) => cells[li][fold] = Some(v.value),
                        Err(e) => {
                            log::warn!("fold {fold}, lambda {lambda:.6e}: value failed: {e}");
                        }
                    }
                }
                Err(e) => {
                    log::warn!("fold {fold}, lambda {lambda:.6e}: fit failed: {e}");
                }
            }
        }
    }

    let mut mean_value = Vec::with_capacity(lambdas.len());
    let mut se_value = Vec::with_capacity(lambdas.len());
    let mut folds_used = Vec::with_capacity(lambdas.len());
    for li in 0..lambdas.len() {
        let vals: Vec<f64> = cells[li].iter().flatten().copied().collect();
        let m = vals.len();
        folds_used.push(m);
        if m == 0 {
            mean_value.push(f64::NAN);
            se_value.push(f64::NAN);
            continue;
        }
        let mean = vals.iter().sum::<f64>() / m as f64;
        let se = if m >= 2 {
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m as f64 - 1.0);
            (var / m as f64).sqrt()
        } else {
            0.0
        };
        mean_value.push(mean);
        se_value.push(se);
    }
    let (lambda_min, lambda_1se) = select_lambdas(lambdas, &mean_value, &se_value)?;
    Ok(CVResult {
        lambdas: lambdas.to_vec(),
        mean_value,
        se_value,
        folds_used,
        fold_values: cells,
        lambda_min,
        lambda_1se,
    })
}

/// A fitted linear treatment rule on the standardized scale.
#[derive(Debug, Clone)]
pub struct Policy {
    /// Coefficients for the full design (intercept first, one slot per
    /// covariate); exactly zero for unselected or excluded covariates.
    pub eta: Array1<f64>,
    /// Indices of covariates retained after pruning, ascending.
    pub selected: Vec<usize>,
    /// Surrogate loss the rule was fit under.
    pub loss: SurrogateKind,
    /// Penalty level of the path fit that the selection came from.
    pub lambda_used: f64,
    /// Whether `eta` comes from the pruned-and-refit step (always true in
    /// the standard flow).
    pub refit: bool,
}

/// Output of [`fit_full`]: the policy plus the pre-prune path fit.
#[derive(Debug, Clone)]
pub struct FullFit {
    /// Pruned-and-refit policy.
    pub policy: Policy,
    /// Pre-prune penalized coefficients on the full design layout (zeros for
    /// excluded covariates). This is the vector the complementary analysis
    /// ranks by.
    pub eta_full: Array1<f64>,
    /// The penalized fit at `lambda` (trace, convergence flag).
    pub fit: FitResult,
    /// The unpenalized refit on the retained columns.
    pub refit_fit: FitResult,
}

/// Fit on all data at a fixed penalty, prune, and refit unpenalized.
///
/// Pruning removes covariates with `|coef| < prune_frac * max|coef|` (the
/// maximum over non-intercept coefficients); coefficients that are exactly
/// zero are never selected. If everything prunes away the result is the
/// intercept-only policy with an empty selection, logged as such.
pub fn fit_full<N: NuisanceEstimator + ?Sized>(
    nd: &NormalizedDataset,
    lambda: f64,
    settings: &FitSettings,
    prune_frac: f64,
    nuisance: &N,
    policy_mask: Option<&[bool]>,
) -> Result<FullFit> {
    settings.solver.validate()?;
    if !(0.0..1.0).contains(&prune_frac) {
        return Err(Error::Config(format!(
            "prune_frac must lie in [0, 1), got {prune_frac}"
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be non-negative, got {lambda}")));
    }
    let cols = policy_columns(nd.p(), policy_mask)?;
    let fitted = nuisance.fit(nd.design.view(), nd.base.treatment.view(), nd.base.outcome.view())?;
    let nf = fitted.predict(nd.design.view())?;
    let contrast = estimate_contrast_aipw(nd.base.treatment.view(), nd.base.outcome.view(), &nf)?;
    let x_pol = nd.design.select(Axis(1), &cols);

    let eta_int = initial_estimate(x_pol.view(), &contrast, settings.loss, &settings.solver)?;
    let spec = PenaltySpec {
        lambda,
        gamma: settings.gamma,
        eta_ref: Some(eta_int.clone()),
        penalize_intercept: settings.penalize_intercept,
    };
    let fit = fit_at(x_pol.view(), &contrast, &spec, eta_int.view(), settings)?;

    // Expand the masked fit back onto the full design layout.
    let p = nd.p();
    let mut eta_full = Array1::<f64>::zeros(p + 1);
    for (slot, &col) in cols.iter().enumerate() {
        eta_full[col] = fit.eta[slot];
    }

    // Prune: selection is the support of coefficients at or above the
    // threshold.
    let max_abs = fit.eta.iter().skip(1).fold(0.0_f64, |m, v| m.max(v.abs()));
    let threshold = prune_frac * max_abs;
    let mut retained_cols: Vec<usize> = Vec::new();
    for (slot, &col) in cols.iter().enumerate().skip(1) {
        let c = fit.eta[slot];
        if c != 0.0 && c.abs() >= threshold {
            retained_cols.push(col);
        }
    }

    let mut refit_design_cols = vec![0usize];
    refit_design_cols.extend(retained_cols.iter().copied());
    if retained_cols.is_empty() {
        log::warn!(
            "all coefficients pruned at lambda {lambda:.6e}; returning the intercept-only policy"
        );
    }
    let x_refit = nd.design.select(Axis(1), &refit_design_cols);
    let refit_fit = unpenalized_fit(x_refit.view(), &contrast, settings)?;

    let mut eta = Array1::<f64>::zeros(p + 1);
    for (slot, &col) in refit_design_cols.iter().enumerate() {
        eta[col] = refit_fit.eta[slot];
    }
    let selected: Vec<usize> = retained_cols.iter().map(|&c| c - 1).collect();
    let policy = Policy {
        eta,
        selected,
        loss: settings.loss,
        lambda_used: lambda,
        refit: true,
    };
    Ok(FullFit {
        policy,
        eta_full,
        fit,
        refit_fit,
    })
}

/// One point of the value-vs-sparsity curve.
#[derive(Debug, Clone)]
pub struct ValuePoint {
    /// Number of variables in the policy (0 = trivial policy).
    pub k: usize,
    /// Name of the variable added at this step (None for k = 0).
    pub added: Option<String>,
    /// Doubly robust value of the fitted k-variable policy.
    pub value: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// False when the fit for this k failed (value fields are NaN).
    pub ok: bool,
}

/// Value-vs-sparsity curve from [`complementary_analysis`].
#[derive(Debug, Clone)]
pub struct ValueCurve {
    /// Covariate indices in importance order (largest |coefficient| first).
    pub ranked: Vec<usize>,
    /// Points for k = 0 ..= ranked.len(), in order.
    pub points: Vec<ValuePoint>,
}

/// Rank variables by the magnitude of their penalized full-data coefficient
/// and trace out the value of the best k-variable policy for each k.
///
/// `eta_full` is the pre-prune coefficient vector from [`fit_full`] (length
/// `p + 1`, intercept first). Excluded names are dropped from the ranking
/// entirely but still feed the nuisance models. The k = 0 point is the
/// better of the two trivial policies (treat everyone / treat no one).
pub fn complementary_analysis<N: NuisanceEstimator + ?Sized>(
    nd: &NormalizedDataset,
    eta_full: ArrayView1<f64>,
    excluded: &[String],
    settings: &FitSettings,
    nuisance: &N,
) -> Result<ValueCurve> {
    settings.solver.validate()?;
    let p = nd.p();
    if eta_full.len() != p + 1 {
        return Err(Error::Invalid(format!(
            "coefficient vector has {} entries for {} covariates",
            eta_full.len(),
            p
        )));
    }
    for name in excluded {
        if !nd.base.names.contains(name) {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    let candidates: Vec<usize> = (0..p)
        .filter(|j| !excluded.contains(&nd.base.names[*j]))
        .collect();
    if candidates.is_empty() {
        return Err(Error::Invalid("every covariate is excluded from the policy".into()));
    }
    let mut ranked = candidates;
    ranked.sort_by(|&a, &b| {
        let wa = eta_full[a + 1].abs();
        let wb = eta_full[b + 1].abs();
        wb.partial_cmp(&wa).unwrap().then(a.cmp(&b))
    });

    let fitted = nuisance.fit(nd.design.view(), nd.base.treatment.view(), nd.base.outcome.view())?;
    let nf = fitted.predict(nd.design.view())?;
    let contrast = estimate_contrast_aipw(nd.base.treatment.view(), nd.base.outcome.view(), &nf)?;

    let n = nd.n();
    let a = nd.base.treatment.view();
    let y = nd.base.outcome.view();
    let evaluate = |d: ArrayView1<f64>| -> Result<ValueEstimate> {
        estimate_value_aipw(a, y, &nf, d)
    };

    let mut points = Vec::with_capacity(ranked.len() + 1);
    // k = 0: better of the two trivial policies.
    let treat_all = evaluate(Array1::<f64>::ones(n).view())?;
    let treat_none = evaluate(Array1::<f64>::zeros(n).view())?;
    let trivial = if treat_all.value >= treat_none.value {
        treat_all
    } else {
        treat_none
    };
    points.push(ValuePoint {
        k: 0,
        added: None,
        value: trivial.value,
        ci_lower: trivial.ci_lower,
        ci_upper: trivial.ci_upper,
        ok: true,
    });

    for k in 1..=ranked.len() {
        let mut cols = vec![0usize];
        cols.extend(ranked[..k].iter().map(|&j| j + 1));
        let x_k = nd.design.select(Axis(1), &cols);
        let added = Some(nd.base.names[ranked[k - 1]].clone());
        let point = match unpenalized_fit(x_k.view(), &contrast, settings) {
            Ok(fit) if fit.converged => {
                let d = policy_assignments(x_k.view(), fit.eta.view())?;
                let v = evaluate(d.view())?;
                ValuePoint {
                    k,
                    added,
                    value: v.value,
                    ci_lower: v.ci_lower,
                    ci_upper: v.ci_upper,
                    ok: true,
                }
            }
            Ok(_) => {
                log::warn!("value curve: fit with k={k} variables did not converge; marked failed");
                ValuePoint {
                    k,
                    added,
                    value: f64::NAN,
                    ci_lower: f64::NAN,
                    ci_upper: f64::NAN,
                    ok: false,
                }
            }
            Err(e) => {
                log::warn!("value curve: fit with k={k} variables failed: {e}");
                ValuePoint {
                    k,
                    added,
                    value: f64::NAN,
                    ci_lower: f64::NAN,
                    ci_upper: f64::NAN,
                    ok: false,
                }
            }
        };
        points.push(point);
    }

    Ok(ValueCurve { ranked, points })
}

/// Apply a fitted policy to raw (unstandardized) covariates.
///
/// Columns are matched by name against the standardizer the policy was
/// trained with, standardized with the stored means and scales, and pushed
/// through the linear rule.
pub fn predict(
    policy: &Policy,
    standardizer: &Standardizer,
    raw: ArrayView2<f64>,
    raw_names: &[String],
) -> Result<Array1<f64>> {
    let design = standardizer.design_for(raw, raw_names)?;
    policy_assignments(design.view(), policy.eta.view())
}
