//! Dense Hermitian linear algebra and norm-preserving time stepping.

mod eigh;
mod evolve;
mod matrix;

pub use eigh::{eigh, eigh_with_cap, SpectralDecomposition, DEFAULT_DIM_CAP};
pub use evolve::{evolve_step, propagate, HamiltonianSource, LinearDrive, MatrixFn, Rk4, MAX_STEP_DRIFT};
pub use matrix::{inner, l2_norm, HermitianMatrix, StateVector, HERMITIAN_TOL};
