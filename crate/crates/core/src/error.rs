use thiserror::Error;

/// Errors raised by point-set construction, the greedy engine and the metrics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("kernel singularity at distance {0:e}")]
    Singularity(f64),

    #[error("angle {angle} is within {min_distance:e} of existing point {existing}")]
    Distinctness {
        angle: f64,
        existing: f64,
        min_distance: f64,
    },

    #[error("invalid state: {0}")]
    State(String),

    #[error("gap of length {length:e} starting at {left} is too short to search")]
    DegenerateGap { left: f64, length: f64 },

    #[error("symmetry violation: {0}")]
    Symmetry(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
