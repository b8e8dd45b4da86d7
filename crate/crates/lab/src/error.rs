use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    /// The configuration does not parse or violates an invariant.
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cfs_core::CoreError),
    #[error(transparent)]
    Variation(#[from] cfs_variations::VariationError),
    #[error(transparent)]
    Wave(#[from] cfs_wave::WaveError),
    #[error(transparent)]
    Dirac(#[from] cfs_dirac::DiracError),
    #[error("i/o error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl LabError {
    /// True for errors caused by the user's input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, LabError::Config(_) | LabError::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
