use cfs_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VariationError {
    #[error("eigen-decomposition failed")]
    EigenFailure,
    #[error("modulus {0:.3e} is too small to differentiate")]
    NonDifferentiable(f64),
    #[error("degenerate closed-chain spectrum at pair ({0}, {1})")]
    Degenerate(usize, usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T> = std::result::Result<T, VariationError>;
