use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("linear solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
