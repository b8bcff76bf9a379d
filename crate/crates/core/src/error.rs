use thiserror::Error;

/// Errors raised by model construction, plan assembly, and the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("scenario validation failed for key `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("plan mismatch: {0}")]
    PlanMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
