//! Particle-method solver for mean-field games of controls with absorbing
//! boundaries.

// Negated comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod cli_io;
pub mod controls;
pub mod engine;
pub mod error;
pub mod interval;
pub mod math;
pub mod measures;
pub mod models;
pub mod rng;

pub use error::{Error, Result};
pub use interval::Interval;
