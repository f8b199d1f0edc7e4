//! Feedback particle filtering with a tensor-product Hermite decomposition gain.
//!
//! The crate is `no_std` (it needs `alloc`). It contains the numerical pieces:
//! Hermite bookkeeping, special functions, the particle-anchored Gaussian
//! mixture, the decomposition gain solver, baseline gains, the time-stepping
//! filters and the benchmark scenarios. File formats, the CLI and timing live
//! in the `fpf-bench` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod error;
pub mod filters;
pub mod gain;
pub mod hermite;
pub mod metrics;
pub mod mixture;
pub mod rng;
pub mod scenarios;
pub mod special;

pub use error::{Error, Result};
