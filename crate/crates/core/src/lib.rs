//! Sentence Gestalt model with a last-layer Bayesian head.

pub mod corpus;
pub mod digest;
pub mod error;
pub mod experiments;
pub mod head;
pub mod network;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
