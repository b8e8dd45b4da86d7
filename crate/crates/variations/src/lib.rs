//! First and second variations of the causal Lagrangian.
//!
//! The kernel `Q(x,y)` is the derivative of the pair Lagrangian with respect
//! to the kernel block `P(x,y)`:
//! `δL = 2 Re Tr(Q(x,y) δP(x,y)^*)` with spin adjoints. It is computed either
//! from Wirtinger finite differences or from the closed-chain
//! eigendecomposition, and the two routes are cross-checked.
//!
//! The second variation of a pair Lagrangian along
//! `P(τ) = P + τ δP + ½ τ² δ²P` splits into
//!
//! * `lfe`: squares of the first variations of the eigenvalue moduli,
//! * `q_term = 2 Re Tr(Q δ²P^*)`,
//! * `remainder`: eigenvector mixing and the convexity of `|λ|`.
//!
//! ```
//! use cfs_core::{random_system, RandomSystemSpec, Tolerances};
//! use cfs_spin::{FermionicKernel, SpinFrame};
//! use cfs_variations::{q_kernel, second_variation_action, QMode, VariationDirection};
//!
//! let system = random_system(&RandomSystemSpec::new(3, 2, 1, 0.2, 7)).unwrap();
//! let tol = Tolerances::default();
//! let frame = SpinFrame::new(&system, tol.sigma_rel);
//! let kernel = FermionicKernel::new(&frame);
//! let q = q_kernel(&system, &frame, &kernel, &tol, QMode::Auto);
//! // the global phase leaves every P(x,y) unchanged to first order
//! let phase = VariationDirection::global_phase(&frame);
//! let report = second_variation_action(&system, &frame, &kernel, &q, &phase, &tol).unwrap();
//! assert!(report.lfe_term.abs() < 1e-12 && report.remainder.abs() < 1e-10);
//! assert!(report.relative_error < 1e-4);
//! ```

mod decoupling;
mod el;
mod error;
mod perturbation;
mod qkernel;
mod second;

pub use decoupling::{decoupling_report, null_direction, DecouplingReport, DecouplingRow};
pub use el::{lagrangian_gradient_x, restricted_el_residual, restricted_el_residual_with};
pub use error::{Result, VariationError};
pub use perturbation::{abs_variation, eigen_perturbation, relative_gap, AbsVariation, EigenPerturbation};
pub use qkernel::{
    first_variation, pair_lagrangian, q_block_fd, q_block_spectral, q_kernel, q_route_agreement, QKernel, QMethod, QMode,
};
pub use second::{
    coupling_form, effective_action_of, five_point_second, five_point_second_adaptive, pair_second_derivative_fd,
    second_variation_action, second_variation_lagrangian, PairRow, PairSecondVariation, SecondVariationReport,
    VariationDirection,
};
