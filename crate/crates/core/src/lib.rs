//! Scaling-method eigenfunctions of a desymmetrized Sinai-type billiard,
//! boundary-integral matrix elements of a region indicator, and the
//! statistics used to test quantum ergodicity rates against the classical
//! power spectrum.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod dynamics;
pub mod elements;
pub mod error;
pub mod geometry;
pub mod quadrature;
pub mod scaling;
pub mod pipeline;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
