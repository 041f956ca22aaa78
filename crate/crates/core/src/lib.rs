//! Sentence-pair matching with dynamic Gaussian attention.
//!
//! A stacked GRU encoder produces per-token states `H` and a global vector
//! `h_g`; the DGA unit then runs `T` steps, each predicting a continuous
//! focus position, re-weighting attention scores with a Gaussian centred on
//! it and feeding the attended context into a GRU. The step states are
//! attention-pooled, fused with `h_g` and classified by a two-layer MLP.
//! Every backward pass is written by hand and checked against finite
//! differences.

pub mod classifier;
pub mod dga;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod model;
pub mod numeric;

pub use error::{Error, Result};
