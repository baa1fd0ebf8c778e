//! Numerical toolkit for a nonlocal reaction-diffusion equation driven by
//! fractional Brownian noise: path sampling, Dirichlet spectral data, a
//! method-of-lines solver, pathwise blow-up time bounds and blow-up
//! probability estimates.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod fbm;
pub mod ode;
pub mod probability;
pub mod quadrature;
pub mod rpde;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
