//! Crate-wide error type.
//!
//! Every fallible public operation returns [`Error`]; the variants map onto
//! the failure categories surfaced by the CLI (configuration/argument
//! problems, numeric breakdowns, unsupported capabilities).

use thiserror::Error;

/// Unified error type for all toolkit operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Two vectors that must share a length do not.
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A value left its mathematical domain (e.g. a nonpositive standard
    /// deviation).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numeric evaluation produced a non-finite or otherwise unusable
    /// result; `phase` names the computation that failed.
    #[error("numeric failure during {phase}: {detail}")]
    Numeric { phase: String, detail: String },

    /// The model does not implement an optional capability.
    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),
}

impl Error {
    /// Shorthand for an [`Error::InvalidArgument`].
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Shorthand for an [`Error::Numeric`].
    pub fn numeric(phase: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numeric {
            phase: phase.into(),
            detail: detail.into(),
        }
    }
}

/// Convenience result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
