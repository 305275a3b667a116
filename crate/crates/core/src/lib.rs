//! Discrete-time Zames-Falb multiplier analysis for Lurye systems.
//!
//! The loop is `v = G w + e`, `w = phi(v)` with a stable SISO plant `G` and a
//! memoryless monotone (or sector-bounded, time-varying) nonlinearity `phi`.

pub mod error;
pub mod hyperdominant;
pub mod linalg;
pub mod lp;
pub mod multiplier_search;
pub mod nonlinearity;
pub mod periodic_banded;
pub mod plant;
pub mod signals;
pub mod simulator;
pub mod sprocedure;

pub use error::{Error, Result};
