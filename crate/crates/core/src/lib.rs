//! Forward and inverse spectral theory for 2×2 canonical Hamiltonian systems
//! `J X' = z H X` on a finite interval.
//!
//! The forward direction ([`forward`]) propagates transfer matrices through a
//! piecewise-constant Hamiltonian and extracts the principal spectral measure.
//! The inverse direction ([`inverse`]) recovers a trace-normalized Hamiltonian
//! from a discrete measure by inverting truncated Toeplitz operators on
//! Paley–Wiener spaces, discretized in an orthonormal sinc basis ([`pwspace`]).

// `!(x <= tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod exec;
pub mod farfield;
pub mod forward;
pub mod inverse;
pub mod mat2;
pub mod model;
pub mod oracles;
pub mod pwspace;
pub mod quadrature;

pub use error::{Error, Result};
pub use model::{Atom, GridConfig, Hamiltonian, ReconstructionResult, Segment, SpectralMeasure};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
