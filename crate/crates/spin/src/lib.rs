//! Spin spaces and the fermionic projector of a discrete causal fermion
//! system.
//!
//! The spin space at a point `x` is the range of `x`. It is represented in
//! coordinates of an orthonormal eigenbasis `E_x` of the nonzero eigenvalues
//! `μ` of `x`. In these coordinates
//!
//! * the spin inner product `≺u|v≻ = −⟨u|x v⟩` has the metric `S_x = −diag(μ)`,
//! * the spin scalar product `⟨⟨u|v⟩⟩ = ⟨u| |x| v⟩` has the metric `diag|μ|`,
//! * the wave evaluation operator is `Ψ(x) = E_x^*` and its spin adjoint is
//!   `Ψ(x)^* = E_x S_x`, so that `x = −Ψ(x)^* Ψ(x)`,
//! * the kernel of the fermionic projector is `P(x,y) = −Ψ(x) Ψ(y)^*`.
//!
//! ```
//! use cfs_core::PointOperator;
//! use cfs_spin::SpinFrame;
//! let x = PointOperator::diagonal(&[2.0, -1.0, 0.0]);
//! let system = cfs_core::DiscreteSystem::new(1, 0.1, vec![x], vec![1.0], vec![0.0]).unwrap();
//! let frame = SpinFrame::new(&system, 1e-9);
//! assert_eq!(frame.dim(0), 2);
//! assert!(frame.local_correlation_residual(&system, 0) < 1e-14);
//! ```

mod frame;
mod kernel;
mod wave;

pub use frame::{spin_products, SpinBasis, SpinError, SpinFrame, SpinProducts};
pub use kernel::{isospectrality_check, FermionicKernel, IsospectralityReport};
pub use wave::WaveFunction;
