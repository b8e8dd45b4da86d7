//! Regularized Dirac dynamics in one spatial Fourier mode and the large-distance
//! behavior of Bessel kernels built from mass shells.
//!
//! The action `S(ψ) = ∫∫ ≺(i∂̸−m)ψ(t) | γ⁰ η(t−t') (i∂̸−m)ψ(t')≻` is positive,
//! yet its Euler-Lagrange equations `(i∂̸−m)γ⁰(i∂̸−m)ψ = 0` are hyperbolic.
//! Per mode they are a fourth-order system whose solutions are
//! `ψ₁ + tψ₂` with `ψ₁, ψ₂` solutions of the Dirac equation.
//!
//! ```
//! use cfs_dirac::{el_operator_mode, DiracMode, ModeSolution, TimeGrid, analytic_el_residual};
//!
//! let mode = DiracMode::new(0.5, 1.0).unwrap();
//! let op = el_operator_mode(&mode);
//! let grid = TimeGrid::new(-2.0, 2.0, 0.01).unwrap();
//! // the Jordan-block solution t·e^{−iωt}u₊
//! let jordan = ModeSolution::basis(mode, 2);
//! assert!(analytic_el_residual(&op, &jordan, &grid) < 1e-12);
//! ```

pub mod action;
pub mod asymptotics;
pub mod commutator;
pub mod error;
pub mod kernel;
pub mod mode;
pub mod profile;
pub mod suite;

pub use action::{action_mode, positivity_sweep, windowed_action, windowed_samples, ActionValue, PositivityReport, Window};
pub use asymptotics::{
    chain_norms, dirac_kernel, kernel_asymptotics, superposition, ChainNorms, KernelAsymptoticsConfig, KernelAsymptoticsReport,
    KernelRow, MassProfile,
};
pub use commutator::{
    commutator_closed_form, conservation, dirac_commutator, dirac_sequence_sweep, positive_direction, CommutatorValue,
    ConservationReport, DiracSequenceReport, LineQuadrature,
};
pub use error::{DiracError, Result};
pub use kernel::{bessel_t_a, bessel_t_a_derivative, log_grid, spacelike_decay, timelike_envelope, timelike_exponent};
pub use mode::{
    analytic_el_residual, clifford_defect, el_operator_mode, gamma0, gamma1, order_fit, residual_convergence,
    solution_basis_and_residual, spin_product, BasisReport, DiracMode, ElOperator, ModeSolution, Spinor, TimeGrid,
};
pub use profile::CutoffProfile;
pub use suite::{plot_samples, run_suite, Check, DiracSuiteConfig, DiracSuiteReport, ModeReport};
