//! Metastability toolkit: exact potential theory and trace-process
//! reduction for finite Markov chains, Poisson-equation test functions for
//! the reduced dynamics, and Monte Carlo checks of the Eyring-Kramers and
//! exponential laws for small-noise gradient diffusions.

// `!(x > 0.0)` is the NaN-rejecting form used throughout for parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod diffusion;
pub mod error;
pub mod landscape;
mod linalg;
pub mod poisson;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
