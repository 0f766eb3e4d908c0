//! normkit-core: one parameterized normalization operator whose
//! accumulation-range configuration yields batch, layer, and divisive
//! normalization, with a smoothing constant σ and an L1 regularizer on
//! centered activations.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense f64 tensors and the value-level kernels;
//! - [`graph`]: the define-by-run differentiation tape;
//! - [`gradcheck`]: central-difference verification;
//! - [`region`]: declarative accumulation ranges and their resolution;
//! - [`norm`]: the two-step normalizer, its presets, and the closed-form
//!   backward held against the tape and finite differences;
//! - [`models`]: MLP / ConvNet / LSTM-cell architectures with normalizer
//!   insertion points;
//! - [`train`]: losses (including the L1 activation penalty), optimizers,
//!   datasets, and the train/eval loops.

#![forbid(unsafe_code)]

pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod models;
pub mod norm;
pub mod region;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
