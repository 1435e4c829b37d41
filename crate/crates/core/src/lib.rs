//! Green-function and boundary-decay numerics for subordinate Brownian
//! motions `X_t = W_{S_t}`, together with a Monte Carlo engine for the killed
//! process that measures the comparability constants empirically.

pub mod bernstein;
pub mod error;
pub mod estimates;
pub mod geometry;
pub mod harness;
pub mod quadrature;
pub mod simulate;

pub use error::{Error, Result};
