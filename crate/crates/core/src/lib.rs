//! Consensus networks: per-modality encoders trained so that their
//! representations become indistinguishable to a modality discriminator while
//! staying useful to a shared classifier.

pub mod cli;
pub mod data;
mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod train;
pub mod viz;

pub use error::{Error, Result};
