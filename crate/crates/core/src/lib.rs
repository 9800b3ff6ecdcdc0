//! Distant-supervision relation extraction: a CNN instance encoder,
//! multi-hop memory-network attention over bags of sentences, and a siamese
//! coupling head, all trained through a small reverse-mode autodiff engine.

pub mod cli;
pub mod corpus;
pub mod coupling;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod memory;
pub mod model;
pub mod numerics;
pub mod training;
mod util;

pub use error::{Error, Result};
pub use util::write_atomic;
