//! Solver and simulator for zero-sum differential games with control-affine
//! dynamics and quadratic cost, played under stepwise mixed strategies.
//!
//! The pipeline: a commitment-delay partition ([`timegrid`]) turns the game
//! ([`game`]) into one where both players commit per-interval randomized
//! controls. A stochastic differential game whose diffusion is scaled by
//! the interval-length function weakly approximates that play; its value
//! solves a backward Riccati-type system ([`value`]) whose strategy
//! extraction uses spectral projections ([`spectral`]). Near-optimal mixed
//! strategies come from the solved value ([`policy`]); both games are
//! simulated by seeded Monte Carlo ([`simulate`]); the approximation order
//! and the suboptimality of the synthesized strategies are verified
//! empirically ([`weak`], [`stats`]).

pub mod error;
pub mod game;
pub mod policy;
pub mod rng;
pub mod simulate;
pub mod spectral;
pub mod stats;
pub mod timegrid;
pub mod value;
pub mod weak;

pub use error::{Error, Result};
