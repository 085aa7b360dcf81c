//! Differential face-morph and impersonation detection from embedding pairs.

pub mod embeddings;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod metrics;
pub mod oneclass;

pub use error::{Error, Result};
