//! Simulation of the degenerately damped wave equation
//! `ü - u_xx + α u^(2m) u̇ = 0` on (0, 1) with Dirichlet ends.
//!
//! The pipeline is a P1 Ritz–Galerkin discretisation in space, a Picard
//! loop over linear problems solved by a Duhamel/Newton–Cotes exponential
//! integrator, and an Adams–Bashforth extension for long horizons. An
//! eigenfunction-ansatz Runge–Kutta oracle and analytic references are
//! provided for validation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod linop;
pub mod linwave;
pub mod mesh;
pub mod multistep;
pub mod oracle;
pub mod output;
pub mod picard;
pub mod quadrature;
pub mod runner;

pub use error::{Error, Result};
