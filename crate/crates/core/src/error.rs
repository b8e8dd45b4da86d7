use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("matrix is not Hermitian (relative residual {0:.3e})")]
    NotHermitian(f64),
    #[error("signature ({pos}, {neg}) exceeds spin dimension {n}")]
    Signature { pos: usize, neg: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("eigen-solver did not converge{}", pair_suffix(.pair))]
    EigenFailure { pair: Option<(usize, usize)> },
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn pair_suffix(pair: &Option<(usize, usize)>) -> String {
    match pair {
        Some((i, j)) => format!(" for pair ({i}, {j})"),
        None => String::new(),
    }
}

impl CoreError {
    pub(crate) fn at_pair(self, i: usize, j: usize) -> Self {
        match self {
            CoreError::EigenFailure { .. } => CoreError::EigenFailure { pair: Some((i, j)) },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
