use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("linear system is singular or rank-deficient")]
    SingularSystem,

    #[error("no stabilizing initial gain found for (A, B)")]
    NotStabilizable,

    #[error("Riccati iteration did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("non-finite state: {0}")]
    NonFiniteState(String),

    #[error("position is inside obstacle {index} at t = {time} s")]
    InsideObstacle { index: usize, time: f64 },

    #[error("malformed link message: {0}")]
    MalformedMessage(String),

    #[error("link closed: {0}")]
    LinkClosed(String),

    #[error("target series has zero norm over the evaluation window")]
    DegenerateTarget,

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("config validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Validation(_) => 2,
            Error::NonFiniteState(_) | Error::InsideObstacle { .. } => 3,
            _ => 1,
        }
    }
}

pub(crate) fn mismatch(what: impl Into<String>) -> Error {
    Error::DimensionMismatch(what.into())
}
