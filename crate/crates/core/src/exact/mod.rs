//! Exact state-vector dynamics for small ensembles.
//!
//! Basis states are bit strings where bit `i = 0` means spin `i` points along
//! `+z`. The Hamiltonian is applied matrix-free and time evolution uses an
//! adaptive Krylov (Lanczos) propagator.

mod hamiltonian;
mod krylov;
mod propagator;
mod state;

pub use hamiltonian::ExactHamiltonian;
pub use propagator::ExactPropagator;
pub use krylov::{krylov_propagate, propagate_sampled, KrylovParams};
pub use state::{prepare_polarized, PureState};

/// Default limit on the number of spins the exact engine accepts.
pub const DEFAULT_MAX_SPINS: usize = 24;
