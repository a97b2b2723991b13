//! Graph-based change-point detection for sequences of multivariate
//! repeated measurements.

// NaN-aware guards such as `!(x > 0.0)` are deliberate, and the moment
// code indexes small fixed-size tensors by position.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod counts;
pub mod critical;
pub mod dataset;
pub mod detect;
pub mod error;
pub mod graph;
pub mod moments;
pub mod permutation;
pub mod pvalue;
pub mod rng;
pub mod segmentation;
pub mod simulate;
pub mod scanstat;

pub use error::{Error, Result};
