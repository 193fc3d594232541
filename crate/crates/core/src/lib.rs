//! Fairness-aware training toolkit built around attribute-adaptive batch
//! normalization.
//!
//! * [`tensor`]: dense `f64` tensors with reverse-mode differentiation.
//! * [`nn`]: dense layers, batch normalization, the per-group adaptive
//!   variant, and an MLP builder with an optional residual layout.
//! * [`optim`]: SGD and AdamW.
//! * [`loss`]: cross-entropy and the between-group statistical-disparity
//!   penalty.
//! * [`fairness`]: utility metrics, equal-opportunity / equalized-odds gaps,
//!   and the FATE trade-off score.
//! * [`data`]: synthetic subgroup-shifted data, CSV ingestion, stratified
//!   splits and batching, and group resampling.
//! * [`harness`]: experiment configuration, training runs, and reports.

// `!(x >= 0.0)` style checks reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod fairness;
pub mod harness;
pub mod loss;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;

/// Binary sensitive attribute value.
pub type Attr = u8;
