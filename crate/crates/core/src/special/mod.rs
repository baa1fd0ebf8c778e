//! Special functions used by the probability estimates.

mod bessel;
mod gamma;

pub use bessel::{bessel_j, bessel_j_log, bessel_j_zeros, mcmahon_zero};
pub use gamma::{gamma, gamma_p, gamma_pq, gamma_q, ln_gamma};
