#![cfg_attr(not(test), no_std)]

//! Core library for conflict-event fatality classification.
//!
//! Everything in here is pure compute over in-memory data: corpus
//! handling, word statistics, WordPiece tokenization, a compact
//! transformer encoder with hand-derived gradients, AdamW training, and
//! binary-classification metrics. File formats are exposed as
//! byte-level encoders/decoders; actual IO lives in the companion CLI
//! crate.

extern crate alloc;

pub mod gradcheck;
pub mod analytics;
pub mod corpus;
pub mod tokenizer;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod training;

pub use scalar::Scalar;
pub use tensor::Tensor;
