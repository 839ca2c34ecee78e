//! Error type shared across the crate.
//!
//! Variants split into two broad families so callers (notably the CLI) can
//! distinguish bad input from numerical failure:
//!
//! * input/validation problems — malformed files, missing columns, config
//!   contradictions, dimension mismatches;
//! * computation problems — solvers that do not converge, separation in the
//!   propensity fit, rank-deficient designs, degenerate contrasts.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Underlying I/O failure (missing file, unreadable path, ...).
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A cell or header could not be parsed.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A column named in the configuration is absent from the data.
    #[error("column not found: {0}")]
    MissingColumn(String),

    /// Missing value (empty cell, "NA" or "NaN") where a number is required.
    #[error("missing value at row {row}, column {col}")]
    MissingValue { row: usize, col: String },

    /// Treatment indicator outside {0, 1}.
    #[error("invalid treatment value {value} at row {row} (must be 0 or 1)")]
    InvalidTreatment { row: usize, value: f64 },

    /// A covariate column is constant and cannot be standardized.
    #[error("constant column cannot be standardized: {0}")]
    ConstantColumn(String),

    /// Configuration file or programmatic settings are invalid.
    #[error("config error: {0}")]
    Config(String),

    /// Caller passed arguments violating a documented precondition
    /// (dimension mismatch, empty input, out-of-range parameter, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A design matrix is rank deficient; `column` is the 0-based index of the
    /// first column found to be linearly dependent on its predecessors.
    #[error("design is rank deficient: column {column} is linearly dependent{context}")]
    RankDeficient { column: usize, context: String },

    /// The propensity fit shows (quasi-)separation: coefficients diverge.
    #[error(
        "(quasi-)separation detected in propensity fit: coefficient norm {norm:.3e} exceeds {limit:.0e}; \
         consider clipping fitted propensities harder or reviewing covariates"
    )]
    Separation { norm: f64, limit: f64 },

    /// An iterative fit ran out of iterations.
    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: String, iterations: usize },

    /// Every estimated treatment contrast is exactly zero, so the weighted
    /// classification problem carries no information.
    #[error("degenerate contrast: all tau estimates are zero")]
    DegenerateContrast,

    /// Catch-all for numerical failures with no more specific variant.
    #[error("computation failed: {0}")]
    Computation(String),
}

impl Error {
    /// True when the error reflects bad input (data or configuration) rather
    /// than a numerical/algorithmic failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Parse { .. }
                | Error::MissingColumn(_)
                | Error::MissingValue { .. }
                | Error::InvalidTreatment { .. }
                | Error::ConstantColumn(_)
                | Error::Config(_)
                | Error::Invalid(_)
        )
    }
}
