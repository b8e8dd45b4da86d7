use cfs_core::CoreError;
use cfs_variations::VariationError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WaveError {
    #[error("invalid time strip: {0}")]
    Strip(String),
    #[error("strip operator is not symmetric (relative residual {0:.3e})")]
    Asymmetric(f64),
    #[error("operator norm {norm:.6e} exceeds the Schwarz bound {bound:.6e}")]
    BoundViolated { norm: f64, bound: f64 },
    #[error("inhomogeneity is not admissible: component {residual:.3e} (relative) outside the range")]
    Inadmissible { residual: f64 },
    #[error("inhomogeneity violates its support constraint: {0}")]
    Support(String),
    #[error("Gram matrix is indefinite: smallest eigenvalue {0:.3e} relative to the largest")]
    Indefinite(f64),
    #[error("cutoff images are not admissible for Hilbert vectors {0:?}")]
    CutoffsInadmissible(Vec<usize>),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Variation(#[from] VariationError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T> = std::result::Result<T, WaveError>;
