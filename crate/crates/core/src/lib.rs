//! Spectral estimation of a drift parameter in linear SPDEs observed
//! through noisy integrated modes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod harness;
pub mod hellinger;
pub mod information;
pub mod oracle;
pub mod simulator;
pub mod spectral;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
