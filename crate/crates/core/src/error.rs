use thiserror::Error;

/// Library error type.
///
/// The CLI maps `Invariant` to exit code 2 and `Numerical` to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("degenerate basis: numerical rank {rank} < {dim}")]
    DegenerateBasis { rank: usize, dim: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("non-loxodromic element: {0}")]
    NonLoxodromic(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
