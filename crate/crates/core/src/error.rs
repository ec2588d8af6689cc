use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("{value} is not a grid node")]
    OffGrid { value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ladder is not a non-increasing sequence of positive reals ending below {tolerance}")]
    InvalidLadder { tolerance: f64 },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
