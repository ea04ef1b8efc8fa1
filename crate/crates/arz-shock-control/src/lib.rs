//! Boundary feedback stabilization of traffic shocks.
//!
//! This crate builds steady shock profiles for a second-order macroscopic
//! traffic model, synthesizes static boundary feedback gains with an
//! exponential-stability certificate, and simulates the closed loop with an
//! explicitly tracked shock front.

// Validation guards are written `!(x > 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Stencil updates and parallel-array comparisons stay index-based; iterator
// rewrites hide the k−1/k/k+1 structure.
#![allow(clippy::needless_range_loop)]
// Frozen reference values are written at full printed precision.
#![allow(clippy::excessive_precision)]

pub mod cli;
pub mod error;
pub mod gains;
pub mod lyapunov;
pub mod model;
pub mod solver;
pub mod tolerances;
pub mod transform;

pub use error::{Error, Result};
