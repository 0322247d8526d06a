//! Numerical toolkit for spectral multipliers of the Hermite operator
//! `H = -Δ + |x|²` and their commutators with BMO functions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commutator;
pub mod error;
pub mod experiments;
pub mod hermite;
pub mod multiplier;
pub mod quad;
pub mod spectral;
pub mod stats;
pub mod trials;
pub mod weighted;

pub use error::{Error, Result};
