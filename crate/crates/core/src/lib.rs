//! Spectral toolkit for two-scale analysis of periodic Maxwell systems.
//!
//! The crate is organized around the pipeline
//!
//! 1. [`trigap`] — exact algebra of trigonometric (almost periodic)
//!    polynomials: products, partial means, derivatives, quasi-periodic
//!    classification and weighted inner products.
//! 2. [`cell`] — periodic elliptic cell problems and the effective
//!    (homogenized) tensors, plus the six-dimensional stationary kernel.
//! 3. [`bloch`] — the shifted Maxwell eigenproblem on the divergence
//!    constraint space: band structures and orthonormal mode families.
//! 4. [`transport`] — finite-dimensional hyperbolic systems carrying the
//!    macroscopic modulation of each mode group, solved in closed form.
//! 5. [`maxwell`] — reference solvers: the oscillating fine-scale system on
//!    a periodic box (energy-conserving implicit midpoint) and the
//!    constant-coefficient effective system (exact per-mode propagator).
//! 6. [`corrector`] — two-scale field reconstruction, the classical elliptic
//!    corrector, and error/energy convergence metrics.
//! 7. [`study`] — experiment configuration, orchestration and reporting.

pub mod bloch;
pub mod cell;
pub mod corrector;
pub mod error;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod material;
pub mod maxwell;
pub mod study;
pub mod transport;
pub mod trigap;

pub use error::{Error, Result};
