//! Wave functions on time strips.
//!
//! On a strip `Ω = {x : t0 ≤ t_x ≤ t1}` the linear operator
//! `(𝒬ψ)(x) = s_x (Σ_y ρ_y Q(x,y)ψ(y) − 𝔯ψ(x))` is symmetric with respect to
//! `⟨ψ|φ⟩_Ω = Σ ρ_x ⟨⟨ψ(x)|φ(x)⟩⟩_x`. Solutions of `𝒬ψ = φ` with `φ` localized
//! near the boundaries are homogeneous inside the strip, and the commutator
//! inner product `⟨ψ|φ⟩^t` is conserved there.
//!
//! A solution driven from the future has vanishing commutator norm. Adding a
//! small inhomogeneity `λ (i/4) s ψ` near the past makes it positive,
//! `⟨ψ|ψ⟩^t = λ‖ψ‖²_past`, which is how the extended space gets its scalar
//! product.
//!
//! [`chain_system`] produces systems whose kernel has finite time range
//! (`δ = 1`), the natural test bed for everything here.
//!
//! ```
//! use cfs_core::Tolerances;
//! use cfs_spin::{FermionicKernel, SpinFrame};
//! use cfs_variations::{q_kernel, QMode};
//! use cfs_wave::{assemble_strip_operator, chain_system, commutator_inner, ChainSpec, TimeStrip};
//!
//! let system = chain_system(&ChainSpec::new(7, 1, 3)).unwrap();
//! let tol = Tolerances::default();
//! let frame = SpinFrame::new(&system, tol.sigma_rel);
//! let kernel = FermionicKernel::new(&frame);
//! let q = q_kernel(&system, &frame, &kernel, &tol, QMode::Auto);
//! let strip = TimeStrip::new(0.0, 2.5, 3.5, 6.0, 1.0).unwrap();
//! let op = assemble_strip_operator(&system, &frame, &q, &strip, &tol).unwrap();
//! assert!(op.symmetry_residual < 1e-10);
//!
//! // the commutator inner product is Hermitian
//! let psi = op.space.extend(&frame, &op.apply(&op.space.restrict(&cfs_spin::WaveFunction::physical(
//!     &frame,
//!     &cfs_core::linalg::CVec::from_element(system.f(), cfs_core::linalg::c(1.0, 0.0)),
//! ))));
//! let v = commutator_inner(&system, &frame, &q, &psi, &psi, 3.0);
//! assert!(v.im.abs() < 1e-12 * (1.0 + v.re.abs()));
//! ```

mod chain;
mod commutator;
mod coupling;
mod error;
mod extended;
mod homogeneous;
mod hygiene;
mod operator;
mod strip;
mod trace_identity;

pub use chain::{chain_system, ChainSpec};
pub use commutator::{
    commutator_inner, commutator_inner_by_sources, commutator_scale, conservation_series, source_formula, wave_operator,
    ConservationSeries,
};
pub use coupling::{coupling_iteration, mean_ratio, CouplingMap, CouplingOptions, CouplingReport};
pub use error::{Result, WaveError};
pub use extended::{
    build_extended_space, embed_hilbert_vectors, EmbeddingRow, ExtendOptions, ExtendedSpace, ExtendedSpaceReport,
};
pub use homogeneous::{
    default_lambda, homogeneous_from_boundary, lambda_sweep, past_source, positivity_perturbation, BoundarySolution,
    SolutionPair, SweepReport, SweepRow,
};
pub use hygiene::{kernel_hygiene, HygieneReport};
pub use operator::{assemble_strip_operator, StripOperator, StripSolution, StripSpace};
pub use strip::{Cutoffs, TimeStrip};
pub use trace_identity::{trace_identity_check, TraceIdentityReport};
