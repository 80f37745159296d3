//! Shared error type for the whole workspace.
//!
//! The CLI maps variants to exit codes: configuration/validation/parse
//! problems exit with 2, numerical failures with 3.

use thiserror::Error;

/// Errors produced by the numerical engines and the scenario layer.
#[derive(Debug, Error)]
pub enum ZenoError {
    /// Structural problems: dimension mismatches, unknown labels, caps exceeded.
    #[error("config error: {0}")]
    Config(String),

    /// Inputs that violate a documented precondition or invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Quadrature or propagation failed to reach its tolerance.
    #[error("numerics error: {0}")]
    Numerics(String),

    /// A modelling assumption required by the requested operation does not
    /// hold for the given inputs.
    #[error("assumption violated: {0}")]
    Assumption(String),

    /// The requested estimate is dominated by numerical noise.
    #[error("inconclusive: {0}")]
    Inconclusive(String),

    /// Scenario document could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ZenoError>;

impl ZenoError {
    /// Exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            ZenoError::Config(_)
            | ZenoError::Validation(_)
            | ZenoError::Assumption(_)
            | ZenoError::Parse(_) => 2,
            ZenoError::Numerics(_) | ZenoError::Inconclusive(_) => 3,
            ZenoError::Io(_) => 1,
        }
    }
}
