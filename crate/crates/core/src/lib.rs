//! Local volatility with Hull-White stochastic short rates.
//!
//! The engine solves a forward equation for `P·Z`, the joint density of
//! `(S(t), r(t))` multiplied by the projection of the stochastic discount
//! factor on those state variables, with a two-step alternating direction
//! implicit scheme. Integrals of `P·Z` give call prices and the
//! stochastic-rate corrective terms that enter the local volatility
//! formula, which in turn drives a maturity-by-maturity calibration.
//!
//! Closed-form Black-Scholes / Hull-White results and an Euler Monte Carlo
//! engine are provided as independent oracles.

// `!(x > 0.0)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod calibration;
pub mod error;
pub mod export;
pub mod models;
pub mod monte_carlo;
pub mod normal;
pub mod pde;
mod quad;

pub use error::{Error, Result};
pub use models::{HybridModel, HullWhiteParams, LocalVolFunction, LocalVolSurface};
