//! Minimal sets of Koopman eigenfunctions for low-dimensional dynamical
//! systems.
//!
//! A system `dx/dt = P(x)` in N dimensions has exactly N independent time
//! mappings (functions `g` with `dg/dt = 1`); every Koopman eigenfunction is
//! `exp(λ g)` for some legal combination of them. This crate finds such sets
//! two ways:
//!
//! - analytically ([`linear_analysis`]): split → canonical → flowbox charts
//!   for linear systems and the registered nonlinear examples;
//! - numerically ([`unitnet`]): a small network trained so each output is a
//!   unit manifold, with an orthogonality penalty keeping the outputs
//!   independent.
//!
//! [`timemaps`] holds the time-mapping algebra and the rank-based
//! independence test; [`validation`] the residual, foliation and comparison
//! checks.

pub mod dynamics;
pub mod error;
pub mod linear_analysis;
pub mod patch;
pub mod timemaps;
pub mod unitnet;
pub mod validation;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
