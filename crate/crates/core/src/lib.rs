//! Monte Carlo simulation of Hanbury Brown-Twiss pair correlations.
//!
//! Chaotic bosons bunch, fermions antibunch and coherent sources stay flat.
//! The crate samples detection events for each case, passes them through a
//! position and time resolving detector, and reconstructs the normalized
//! pair correlation function, its correlation length and the number
//! fluctuations in a subvolume.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detector;
pub mod error;
pub mod estimators;
pub mod field;
pub mod io;
pub mod physics;
pub mod pipeline;
pub mod sampling;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
