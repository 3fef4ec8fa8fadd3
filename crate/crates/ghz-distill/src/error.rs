//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Subsystem indices are 1, 2, 3.
    #[error("invalid subsystem index {0} (expected 1, 2, or 3)")]
    InvalidSubsystem(u8),

    /// A state vector whose norm is too far from 1 to repair silently.
    #[error("state is not normalized: |norm^2 - 1| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotNormalized { deviation: f64, tolerance: f64 },

    /// A 2x2 matrix that was supposed to be unitary is not.
    #[error("matrix is not unitary: max deviation from U*U = I is {deviation:.3e}")]
    NotUnitary { deviation: f64 },

    /// A probability-like argument fell outside its admissible range.
    #[error("{name} = {value} outside admissible range [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// Target ordering for an incremental measurement step was violated.
    #[error("invalid step target: require 1/2 <= p_target <= p <= 1, got p = {p}, p_target = {target}")]
    BadStepTarget { p: f64, target: f64 },

    /// Operation requires a triple state.
    #[error("state is not a triple state (off-pattern residual {residual:.3e})")]
    NotTripleState { residual: f64 },

    #[error("malformed state data: {0}")]
    MalformedState(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
