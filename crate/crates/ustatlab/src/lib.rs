//! A desk-scale laboratory for moment inequalities of nonnegative generalized
//! U-statistics on finite probability spaces.
//!
//! The crate computes the norms appearing in Rosenthal / Johnson–Schechtman
//! type inequalities exactly, executes the constructive decompositions behind
//! them (level cuts, disjointization, weighted thresholds, the four-summand
//! split and its 2^m-summand recursion), solves K-functionals of mixed-norm
//! couples by convex optimization, and checks every two-sided equivalence on
//! concrete finite instances.
//!
//! Layout follows the pipeline:
//!
//! * [`spaces`] — finite measure spaces, products, disjoint unions, dense
//!   tensor fields with exact integration;
//! * [`hoeffding`] — conditional expectations, Hoeffding projections and the
//!   full decomposition, kernel extraction and U-statistic assembly;
//! * [`norms`] — mixed `L^q(L^p)` norms, the U-statistic left-hand-side
//!   functionals (exact and Monte Carlo), square functions;
//! * [`interp`] — K-functionals, interpolation sum/intersection norms,
//!   `(θ,q)` norms by quadrature, constrained K-functionals;
//! * [`decomp`] — the constructive decomposition algorithms with per-part
//!   norm certificates;
//! * [`verify`] — inequality checkers and empirical-constant estimators;
//! * [`oracle`] — brute-force reference solvers (grid search, bucket
//!   assignment, soft-threshold) used to validate everything else;
//! * [`cli`] — the experiment runner behind the `ustatlab` binary.
//!
//! Everything is `f64`, immutable after construction and deterministic given
//! the seeds carried in instance descriptors.

pub mod cli;
pub mod decomp;
pub mod hoeffding;
pub mod instances;
pub mod interp;
pub mod norms;
pub mod oracle;
pub mod report;
pub mod spaces;
pub mod verify;

use thiserror::Error;

/// Crate-wide error type. Variant names follow the failure taxonomy used
/// throughout the operation contracts.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("weights do not form a probability measure: {0}")]
    NotProbability(String),
    #[error("size guard exceeded: {0}")]
    TooLarge(String),
    #[error("bad axis: {0}")]
    BadAxis(String),
    #[error("bad level: {0}")]
    BadLevel(String),
    #[error("kernel values must be nonnegative: {0}")]
    NotNonnegative(String),
    #[error("norm spec does not match field: {0}")]
    BadSpec(String),
    #[error("Hoeffding levels above the stated maximum are present: {0}")]
    HigherLevelsPresent(String),
    #[error("parts do not reconstruct the target: {0}")]
    NotADecomposition(String),
    #[error("bad threshold: {0}")]
    BadThreshold(String),
    #[error("target is not canonical (mean zero in every variable): {0}")]
    NotCanonical(String),
    #[error("instance violates the hypotheses of the check: {0}")]
    BadInstance(String),
    #[error("unknown check: {0}")]
    BadCheck(String),
    #[error("undefined at this input: {0}")]
    Undefined(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Default relative tolerance for floating comparisons, unless an operation
/// states otherwise.
pub const REL_TOL: f64 = 1e-9;

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (a.abs().max(b.abs()).max(1.0))
}
