//! Time-series augmentation recommendation: synthetic benchmark generation,
//! augmentations, STL profiling, twin-dataset recommendation and a small
//! contrastive-learning harness.

// Numeric kernels index several arrays in lockstep, and `!(x > 0.0)` is
// the intended NaN-rejecting form.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod contrastive;
pub mod dataset;
pub mod error;
pub mod numerics;
pub mod rankings;
pub mod recommend;
pub mod stl;
pub mod synthgen;

pub use error::{Error, Result};
