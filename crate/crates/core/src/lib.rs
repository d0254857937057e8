//! Matrix-free spectral solvers for quasiperiodic Maxwell problems.
//!
//! A quasiperiodic field on R³ is represented through a periodic parent on
//! the n-torus and a 3×n projection matrix. Unknowns are stored in a
//! pointwise divergence-free Fourier basis, and both the source operator
//! `∇×(ε⁻¹∇×u) + κu` and the eigen operator `∇×∇×(ε⁻¹u)` are applied
//! matrix-free through n-dimensional FFTs.

pub mod basis;
pub mod error;
pub mod lattice;
pub mod operators;
pub mod permittivity;
pub mod problems;
pub mod solvers;
pub mod transforms;
pub mod verification;

pub use error::{Error, Result};
