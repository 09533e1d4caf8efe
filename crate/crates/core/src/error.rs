use thiserror::Error;

use crate::frac_calc::WeightedFunction;
use crate::solver::SolveDiagnostics;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The value exists but does not fit in an `f64`; `ln_value` is its natural log.
    #[error("overflow: {what} (ln value ≈ {ln_value:.6e})")]
    Overflow { what: String, ln_value: f64 },

    #[error("series did not converge: {0}")]
    Convergence(String),

    #[error("non-finite integrand at node {node} (t = {t})")]
    Singularity { node: usize, t: f64 },

    #[error("grid too coarse: n = {n}, need at least {min}")]
    GridTooCoarse { n: usize, min: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Picard iteration did not converge after {} iterations (last step {:.3e})", .0.1.iterations, .0.1.final_step_norm)]
    NoConvergence(Box<(WeightedFunction, SolveDiagnostics)>),

    #[error("comparison function is not nondecreasing between nodes {node} and {}", node + 1)]
    NotIncreasing { node: usize },

    #[error("Gronwall hypothesis violated at node {node}: u = {lhs}, bound = {rhs}")]
    HypothesisNotSatisfied { node: usize, lhs: f64, rhs: f64 },

    #[error("parse error on line {line} ({key}): {message}")]
    Parse {
        line: usize,
        key: String,
        message: String,
    },

    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
