//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by cloud construction, operator application and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A point cloud with zero points was supplied.
    #[error("empty cloud")]
    EmptyCloud,

    /// A coordinate was NaN or infinite.
    #[error("invalid coordinate")]
    InvalidCoordinate,

    /// Two per-point containers that must be index-aligned have different lengths.
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// A singular kernel was evaluated at the origin.
    #[error("singular evaluation")]
    SingularEvaluation,

    /// The cloud has zero spatial extent (all points coincident).
    #[error("degenerate cloud: zero spatial extent")]
    DegenerateCloud,

    /// An iteration index outside `1..=n` was passed to the width schedule.
    #[error("iteration index {index} out of range 1..={count}")]
    IterationOutOfRange { index: usize, count: usize },

    /// A parameter failed validation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A file could not be parsed; `line` is 1-based where applicable.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
