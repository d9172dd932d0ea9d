//! Class-wise hashing toolkit.
//!
//! Trains a small feedforward embedding network with a class-wise Gaussian
//! softmax loss, drives the embeddings onto the corners of a hypercube in two
//! stages (a cube penalty, then a vertex penalty), packs the signs into
//! compact binary codes, and serves and evaluates Hamming-distance retrieval.
//!
//! Modules follow the pipeline order:
//!
//! - [`net`] — dense feedforward network: forward, backward, SGD.
//! - [`loss`] — class-wise loss, stage penalties, center maintenance.
//! - [`trainer`] — two-stage training loop with periodic center refresh.
//! - [`codec`] — sign quantization and bit-packed code files.
//! - [`index`] — exhaustive Hamming top-k over packed codes.
//! - [`eval`] — MAP / precision@k / nDCG under single- and multi-label rules.
//! - [`data`] — synthetic Gaussian datasets, splits, and dataset files.

pub mod codec;
pub mod data;
pub mod error;
pub mod eval;
mod fsio;
pub mod index;
pub mod loss;
pub mod net;
pub mod trainer;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil;
