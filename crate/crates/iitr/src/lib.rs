//! Doubly robust learning of interpretable individualized treatment rules.
//!
//! Given observational or randomized data `(X, A, Y)` with a binary
//! treatment, this crate estimates a sparse linear rule
//! `d(x) = 1{x'eta > 0}` that decides who should be treated:
//!
//! 1. nuisance models (logistic propensity, per-arm linear outcome means)
//!    produce augmented inverse-probability-weighted contrast estimates per
//!    unit ([`nuisance`]);
//! 2. maximizing the estimated policy value is recast as weighted
//!    classification of the contrast signs with weights `|tau_i|`
//!    ([`losses`]);
//! 3. a bounded ramp (via a difference-of-convex loop) or hinge surrogate is
//!    minimized with an adaptive L1 penalty ([`solvers`]);
//! 4. the penalty level is chosen by treatment-stratified cross-validation on
//!    doubly robust value, followed by pruning and an unpenalized refit
//!    ([`pipeline`]);
//! 5. a value-vs-sparsity curve quantifies what each additional variable
//!    buys ([`pipeline::complementary_analysis`]).
//!
//! [`sim`] contains a synthetic benchmark with known ground truth, and
//! [`config`] / [`report`] carry the file formats used by the command-line
//! interface.

pub mod config;
pub mod dataset;
pub mod error;
mod linalg;
pub mod losses;
pub mod nuisance;
pub mod pipeline;
pub mod report;
pub mod sim;
pub mod solvers;

pub use error::{Error, Result};
