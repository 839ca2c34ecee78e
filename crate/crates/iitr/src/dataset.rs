//! Data ingestion, standardization, and fold assignment.
//!
//! A [`Dataset`] is a plain rectangular table: named numeric covariates, a
//! binary treatment indicator, and a numeric outcome. [`normalize`] centers
//! and scales every covariate (sample standard deviation, `n - 1` in the
//! denominator) and prepends an intercept column of ones, producing the design
//! matrix every downstream fit works on. [`kfold_split`] produces
//! treatment-stratified folds from a seeded generator so cross-validation is
//! reproducible.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// Cell tokens treated as missing values.
const MISSING_TOKENS: [&str; 3] = ["", "NA", "NaN"];

/// Column selection for [`load_table`].
#[derive(Debug, Clone)]
pub struct TableSpec {
    /// Name of the outcome column.
    pub outcome: String,
    /// Name of the treatment column (values must be 0 or 1).
    pub treatment: String,
    /// Field delimiter (`,` by default).
    pub delimiter: u8,
    /// Columns dropped entirely (not used as covariates or nuisance inputs).
    pub drop: Vec<String>,
}

impl TableSpec {
    pub fn new(outcome: impl Into<String>, treatment: impl Into<String>) -> Self {
        TableSpec {
            outcome: outcome.into(),
            treatment: treatment.into(),
            delimiter: b',',
            drop: Vec::new(),
        }
    }
}

/// In-memory dataset: covariates by name, treatment in {0,1}, outcome.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Covariate column names, in column order.
    pub names: Vec<String>,
    /// `n x p` covariate matrix.
    pub covariates: Array2<f64>,
    /// Treatment indicator per unit, each exactly 0.0 or 1.0.
    pub treatment: Array1<f64>,
    /// Observed outcome per unit.
    pub outcome: Array1<f64>,
}

impl Dataset {
    /// Construct with validation: consistent dimensions, finite values,
    /// treatment in {0,1}, and at least one covariate.
    pub fn new(
        names: Vec<String>,
        covariates: Array2<f64>,
        treatment: Array1<f64>,
        outcome: Array1<f64>,
    ) -> Result<Self> {
        let n = covariates.nrows();
        let p = covariates.ncols();
        if p == 0 {
            return Err(Error::Invalid("dataset has no covariate columns".into()));
        }
        if names.len() != p {
            return Err(Error::Invalid(format!(
                "{} covariate names for {} columns",
                names.len(),
                p
            )));
        }
        if treatment.len() != n || outcome.len() != n {
            return Err(Error::Invalid(format!(
                "inconsistent lengths: {} covariate rows, {} treatments, {} outcomes",
                n,
                treatment.len(),
                outcome.len()
            )));
        }
        if n == 0 {
            return Err(Error::Invalid("dataset has no rows".into()));
        }
        for (row, &a) in treatment.iter().enumerate() {
            if a != 0.0 && a != 1.0 {
                return Err(Error::InvalidTreatment { row: row + 1, value: a });
            }
        }
        if covariates.iter().any(|v| !v.is_finite())
            || outcome.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Invalid("non-finite value in covariates or outcome".into()));
        }
        Ok(Dataset {
            names,
            covariates,
            treatment,
            outcome,
        })
    }

    /// Number of units.
    pub fn n(&self) -> usize {
        self.covariates.nrows()
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    /// Row indices belonging to a treatment arm (0 or 1).
    pub fn arm_indices(&self, arm: u8) -> Vec<usize> {
        let target = arm as f64;
        self.treatment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == target)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Load a delimited text table with a header row.
///
/// All columns other than the outcome, the treatment, and the dropped ones
/// become covariates, in file order. Cells are trimmed; empty cells, `NA`,
/// and `NaN` are rejected as missing values. Rows are reported 1-based, not
/// counting the header.
pub fn load_table(path: impl AsRef<Path>, spec: &TableSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{path_str}: {e}"),
            )),
            _ => Error::Parse {
                path: path_str.clone(),
                line: 0,
                msg: e.to_string(),
            },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path_str.clone(),
            line: 1,
            msg: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    for (i, h) in headers.iter().enumerate() {
        if headers[..i].contains(h) {
            return Err(Error::Invalid(format!("duplicate column name: {h}")));
        }
    }
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let outcome_idx = find(&spec.outcome)?;
    let treatment_idx = find(&spec.treatment)?;
    for d in &spec.drop {
        find(d)?;
    }

    let mut covariate_cols: Vec<usize> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for (j, h) in headers.iter().enumerate() {
        if j == outcome_idx || j == treatment_idx || spec.drop.iter().any(|d| d == h) {
            continue;
        }
        covariate_cols.push(j);
        names.push(h.clone());
    }
    if covariate_cols.is_empty() {
        return Err(Error::Invalid("no covariate columns remain after selection".into()));
    }

    let parse_cell = |raw: &str, row: usize, col: &str| -> Result<f64> {
        let t = raw.trim();
        if MISSING_TOKENS.contains(&t) {
            return Err(Error::MissingValue {
                row,
                col: col.to_string(),
            });
        }
        let v: f64 = t.parse().map_err(|_| Error::Parse {
            path: path_str.clone(),
            line: row + 1,
            msg: format!("non-numeric value {t:?} in column {col}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                path: path_str.clone(),
                line: row + 1,
                msg: format!("non-finite value {t:?} in column {col}"),
            });
        }
        Ok(v)
    };

    let mut covariates: Vec<f64> = Vec::new();
    let mut treatment: Vec<f64> = Vec::new();
    let mut outcome: Vec<f64> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse {
            path: path_str.clone(),
            line: row + 1,
            msg: e.to_string(),
        })?;
        let a = parse_cell(&record[treatment_idx], row, &headers[treatment_idx])?;
        if a != 0.0 && a != 1.0 {
            return Err(Error::InvalidTreatment { row, value: a });
        }
        treatment.push(a);
        outcome.push(parse_cell(&record[outcome_idx], row, &headers[outcome_idx])?);
        for (&j, name) in covariate_cols.iter().zip(&names) {
            covariates.push(parse_cell(&record[j], row, name)?);
        }
    }

    let n = treatment.len();
    if n == 0 {
        return Err(Error::Invalid(format!("{path_str}: no data rows")));
    }
    let covariates = Array2::from_shape_vec((n, names.len()), covariates)
        .expect("row-major covariate buffer matches dimensions");
    Dataset::new(names, covariates, Array1::from(treatment), Array1::from(outcome))
}

/// Column-wise standardization parameters learned from training data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    /// Covariate names, in design order.
    pub names: Vec<String>,
    /// Column means.
    pub means: Vec<f64>,
    /// Column sample standard deviations (n - 1 denominator).
    pub sds: Vec<f64>,
}

impl Standardizer {
    /// Build the `n x (p + 1)` design matrix (intercept column of ones first)
    /// for a raw covariate matrix whose columns are identified by
    /// `raw_names`. Columns are matched by name, so order may differ from
    /// training; a missing column is an error.
    pub fn design_for(&self, raw: ArrayView2<f64>, raw_names: &[String]) -> Result<Array2<f64>> {
        if raw.ncols() != raw_names.len() {
            return Err(Error::Invalid(format!(
                "{} raw columns but {} names",
                raw.ncols(),
                raw_names.len()
            )));
        }
        let n = raw.nrows();
        let p = self.names.len();
        let mut design = Array2::<f64>::zeros((n, p + 1));
        design.column_mut(0).fill(1.0);
        for (j, name) in self.names.iter().enumerate() {
            let src = raw_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))?;
            let m = self.means[j];
            let s = self.sds[j];
            for i in 0..n {
                design[[i, j + 1]] = (raw[[i, src]] - m) / s;
            }
        }
        Ok(design)
    }

    /// Translate coefficients for the standardized design into coefficients
    /// on the raw covariate scale. Input and output are both length `p + 1`
    /// with the intercept first:
    /// `raw_j = eta_j / sd_j`, `raw_0 = eta_0 - sum_j eta_j * mean_j / sd_j`.
    pub fn raw_scale_coefficients(&self, eta: ArrayView1<f64>) -> Result<Array1<f64>> {
        let p = self.names.len();
        if eta.len() != p + 1 {
            return Err(Error::Invalid(format!(
                "expected {} coefficients (intercept + {} covariates), got {}",
                p + 1,
                p,
                eta.len()
            )));
        }
        let mut out = Array1::<f64>::zeros(p + 1);
        let mut intercept = eta[0];
        for j in 0..p {
            let slope = eta[j + 1] / self.sds[j];
            out[j + 1] = slope;
            intercept -= slope * self.means[j];
        }
        out[0] = intercept;
        Ok(out)
    }
}

/// A dataset with standardized covariates and a ready-to-use design matrix.
#[derive(Debug, Clone)]
pub struct NormalizedDataset {
    /// The untouched input data.
    pub base: Dataset,
    /// Standardization parameters (means, sds, column names).
    pub standardizer: Standardizer,
    /// `n x (p + 1)` design: intercept column of ones, then standardized
    /// covariates in `base.names` order.
    pub design: Array2<f64>,
}

impl NormalizedDataset {
    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn p(&self) -> usize {
        self.base.p()
    }
}

/// Standardize every covariate to mean zero and sample standard deviation one
/// and attach the intercept column. Requires `n >= 2`; a constant column is
/// an error because it cannot be scaled.
pub fn normalize(base: Dataset) -> Result<NormalizedDataset> {
    let n = base.n();
    let p = base.p();
    if n < 2 {
        return Err(Error::Invalid(format!(
            "need at least 2 rows to standardize, got {n}"
        )));
    }
    let mut means = Vec::with_capacity(p);
    let mut sds = Vec::with_capacity(p);
    for j in 0..p {
        let col = base.covariates.index_axis(Axis(1), j);
        let mean = col.sum() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        if sd == 0.0 {
            return Err(Error::ConstantColumn(base.names[j].clone()));
        }
        means.push(mean);
        sds.push(sd);
    }
    let standardizer = Standardizer {
        names: base.names.clone(),
        means,
        sds,
    };
    let design = standardizer.design_for(base.covariates.view(), &base.names)?;
    Ok(NormalizedDataset {
        base,
        standardizer,
        design,
    })
}

/// Fold labels for cross-validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    /// Number of folds.
    pub k: usize,
    /// Fold label (in `0..k`) per unit.
    pub fold_index: Vec<usize>,
}

impl FoldAssignment {
    /// Indices of units outside / inside fold `fold`.
    pub fn train_test(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.fold_index.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Treatment-stratified K-fold assignment from a seeded generator.
///
/// Within each arm, unit indices are shuffled and dealt round-robin, so per
/// arm the fold sizes differ by at most one and every fold contains both arms
/// whenever each arm has at least `k` units (anything less is an error).
pub fn kfold_split(treatment: ArrayView1<f64>, k: usize, seed: u64) -> Result<FoldAssignment> {
    let n = treatment.len();
    if k < 2 {
        return Err(Error::Invalid(format!("k must be at least 2, got {k}")));
    }
    if n < 2 * k {
        return Err(Error::Invalid(format!(
            "cannot split {n} units into {k} folds with both arms present"
        )));
    }
    let mut arm0 = Vec::new();
    let mut arm1 = Vec::new();
    for (i, &a) in treatment.iter().enumerate() {
        match a {
            x if x == 0.0 => arm0.push(i),
            x if x == 1.0 => arm1.push(i),
            value => return Err(Error::InvalidTreatment { row: i + 1, value }),
        }
    }
    for (arm, members) in [(0, &arm0), (1, &arm1)] {
        if members.len() < k {
            return Err(Error::Invalid(format!(
                "treatment arm {arm} has {} units, fewer than the {k} folds required for stratification",
                members.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_index = vec![0usize; n];
    for members in [&mut arm0, &mut arm1] {
        members.shuffle(&mut rng);
        for (pos, &unit) in members.iter().enumerate() {
            fold_index[unit] = pos % k;
        }
    }
    Ok(FoldAssignment { k, fold_index })
}
