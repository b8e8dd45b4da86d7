//! Discrete causal fermion systems.
//!
//! A system is a finite collection of Hermitian operators ("spacetime
//! points") on a finite-dimensional Hilbert space, each with at most `n`
//! positive and `n` negative eigenvalues, carrying positive weights that sum
//! to one. The causal action couples every pair of points through the
//! eigenvalues of the operator product `xy`.
//!
//! ```
//! use cfs_core::{causal_action, DiscreteSystem, PointOperator};
//! let x = PointOperator::diagonal(&[1.0, 0.0]);
//! let system = DiscreteSystem::new(1, 0.1, vec![x], vec![1.0], vec![0.0]).unwrap();
//! assert!((causal_action(&system).unwrap() - 0.6).abs() < 1e-15);
//! ```

pub mod action;
pub mod error;
pub mod linalg;
pub mod minimize;
pub mod point;
pub mod random;
pub mod spectrum;
pub mod system;
pub mod tolerances;

pub use action::{
    causal_action, constraint_report, effective_action, el_values, ell, fit_lagrange_parameters, lagrangian_matrix, potential,
    ConstraintReport,
};
pub use error::{CoreError, Result};
pub use minimize::{minimize_action, MinimizeOptions, MinimizeReport, Parametrization, TraceHandling};
pub use point::{PointOperator, Signature};
pub use random::{random_point, random_system, RandomSystemSpec};
pub use spectrum::{
    chain_spectrum, classify, classify_spectrum, lagrangian, lagrangian_from_moduli, spectrum_of_product, CausalClass,
    ChainSpectrum,
};
pub use system::DiscreteSystem;
pub use tolerances::Tolerances;
