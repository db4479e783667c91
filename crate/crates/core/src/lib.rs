//! Behavioral model of frequency-domain neural processing on ADC/DAC-free
//! analog crossbars.
//!
//! The crate covers the full numerical path of a blockwise Walsh-Hadamard
//! (BWHT) layer executed bit-serially on a ±1 crossbar whose product sums are
//! digitized by 1-bit comparators:
//!
//! - [`hadamard`]: Hadamard/Walsh matrices, fast transforms, block planning.
//! - [`fixedpoint`]: sign-magnitude input codec and bitplane slicing.
//! - [`crossbar`]: per-bitplane product sums, comparator decisions, the
//!   1-bit approximate transform, its exact oracle and the noise model.
//! - [`earlyterm`]: MSB-first predictive early termination and cycle accounting.
//! - [`activation`]: soft thresholding with trainable thresholds.
//! - [`surrogate`]: smooth stand-ins for sign and bit extraction used for training.
//! - [`network`]: desk-scale BWHT network, regularized loss, training loop.

pub mod activation;
pub mod crossbar;
pub mod earlyterm;
pub mod error;
pub mod fixedpoint;
pub mod hadamard;
pub mod network;
pub mod surrogate;

pub use error::{Error, Result};
