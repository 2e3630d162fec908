//! Replicated LDA topic models and internal-consistency reliability.
// NaN takes the error branch of `!(x > 0.0)` checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod corpus;
pub mod downstream;
pub mod error;
pub mod io;
pub mod lda;
pub mod perturb;
pub mod pipeline;
pub mod reliability;
pub mod stats;
pub mod svg;
pub mod synthgen;

pub use error::{Error, Result};
