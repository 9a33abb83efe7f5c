//! Numerical laboratory for Gaussian density bounds of additive-noise SPDEs.
//!
//! The crate simulates the stochastic heat equation on `[0, 1]` with
//! Dirichlet conditions, the stochastic heat equation on a periodic
//! truncation of `R^d`, and the stochastic wave equation in `d <= 3`,
//! together with their Malliavin tangent (adjoint) equations. From pairs
//! of Mehler-shifted trajectories it estimates the conditioning function
//! `g(z) = E[<DF, -DL^{-1}F>_H | F = z]`, reconstructs the density of
//! `F = u(t, x*) - E u(t, x*)` from it and checks two-sided Gaussian
//! envelopes.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod density;
pub mod error;
mod fft;
pub mod experiments;
pub mod kernels;
pub mod malliavin;
pub mod noise;
pub mod quadrature;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
