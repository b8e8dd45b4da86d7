use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiracError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("grid under-resolves the mode: hω = {h_omega:.3e} exceeds {limit}")]
    UnderResolved { h_omega: f64, limit: f64 },
    #[error("ξ² = {xi2:.3e} lies within {tol:.1e} of the light cone")]
    LightCone { xi2: f64, tol: f64 },
    #[error("quadrature did not converge at ξ² = {xi2:.6e}: {message}; refine by shrinking the ξ² range or raising the iteration limit")]
    Quadrature { xi2: f64, message: String },
}

pub type Result<T> = std::result::Result<T, DiracError>;
