//! Classical compression of brickwall quantum circuits.
//!
//! The library optimizes the two-qubit gates of a layered (brickwall) circuit
//! so that the circuit approximates a reference time-evolution operator,
//! represented either as a dense matrix (small systems) or as a matrix
//! product operator (MPO). Optimization runs on the manifold of 4x4
//! unitaries, either with a Riemannian ADAM scheme that updates all gates
//! simultaneously or with a local polar-update sweep.
//!
//! Module map:
//! - [`linalg`]: dense complex tensors, contraction, SVD/QR/polar/expm
//! - [`stiefel`]: tangent projection, polar retraction, vector transport
//! - [`mpo`]: MPO representation, canonical forms, compression, layer merging
//! - [`circuit`]: the brickwall circuit container
//! - [`model`]: Hamiltonians, Trotter steps, swap networks, Weyl gates,
//!   double factorization, circuit initialization
//! - [`reference`]: reference-operator construction and its error budget
//! - [`gradient`]: overlap, costs and gate gradients via cached environments
//! - [`optimize`]: Riemannian ADAM, local sweeps, stopping rules, run records

pub mod circuit;
pub mod gradient;
pub mod linalg;
pub mod model;
pub mod mpo;
pub mod optimize;
pub mod reference;
pub mod stiefel;

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible tensor/matrix dimensions.
    #[error("dimension mismatch: {0}")]
    Dim(String),
    /// Invalid argument or configuration value.
    #[error("invalid parameter: {0}")]
    Param(String),
    /// A computation was refused because it would exceed the dense-size guard.
    #[error("resource guard: {0}")]
    ResourceGuard(String),
    /// A numerical routine failed (no convergence, non-finite values, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Malformed serialized data.
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Assertion tolerance used by library-wide unitarity/isometry checks.
pub const TOL_UNITARY: f64 = 1e-10;
/// Target accuracy for fresh factorizations (QR/SVD reconstruction).
pub const TOL_FACTOR: f64 = 1e-12;
