//! Two-level and two-grid iterative solvers with pluggable inexact coarse
//! solvers, together with the spectral machinery needed to verify their
//! convergence identities and error bounds on generated test problems.
//!
//! The crate is organized bottom-up:
//!
//! - [`matrix`]: dense symmetric kernels (Cholesky, Jacobi eigensolver,
//!   pseudoinverse, energy norms, MatrixMarket IO).
//! - [`problems`]: generators for SPD test systems and splittings (S, P).
//! - [`hierarchy`]: validated two-level operator bundles (Galerkin
//!   products, symmetrized smoothers, the A-orthogonal projector).
//! - [`solvers`]: the coarse-solver contract and its exact, conjugate
//!   gradient, randomized coordinate descent, randomized block descent,
//!   and stationary implementations, each with an accuracy certificate.
//! - [`engine`]: the outer two-level / two-grid iterations and explicit
//!   iteration-matrix assembly.
//! - [`theory`]: condition numbers, convergence factors, and the error
//!   bounds, verified against measured behavior.

pub mod engine;
pub mod error;
pub mod hierarchy;
pub mod matrix;
pub mod problems;
pub mod report;
pub mod rng;
pub mod solvers;
pub mod theory;

pub use error::{Error, Result};
pub use matrix::{GenMatrix, SymMatrix};
