use thiserror::Error;

/// Errors raised by the solvers and instance builders.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GwError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),

    #[error("invalid marginals: {0}")]
    InvalidMarginals(String),

    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    #[error("total mass mismatch: source {source_mass}, target {target_mass}")]
    MassMismatch { source_mass: f64, target_mass: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("network simplex exceeded {pivots} pivots (last entering reduced cost {reduced_cost:e})")]
    PivotLimit { pivots: usize, reduced_cost: f64 },

    #[error("sinkhorn produced a non-finite scaling (epsilon {epsilon:e} too small for the cost range)")]
    NonFiniteKernel { epsilon: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("gave up after {attempts} attempts: {what}")]
    ResampleLimit { attempts: usize, what: &'static str },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
}

pub type Result<T> = std::result::Result<T, GwError>;

pub(crate) fn dim_mismatch(
    context: &'static str,
    expected: impl ToString,
    actual: impl ToString,
) -> GwError {
    GwError::DimensionMismatch {
        context,
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
