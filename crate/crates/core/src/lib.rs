//! Simulation and analysis toolkit for a biased-erasure qubit encoded in the
//! Fock states `|0>` and `|2>` of a lossy harmonic oscillator.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod benchmarking;
pub mod channels;
pub mod erasure;
pub mod error;
pub mod fitstats;
pub mod hilbert;
pub mod measure;
pub mod rng;
pub mod tomography;

pub use error::{Error, Result};
