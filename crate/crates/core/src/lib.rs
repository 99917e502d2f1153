//! Sequence tagging with recurrent networks, including an Elman-style network
//! augmented with a content-addressed external memory.

pub mod cells;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod gradcheck;
pub mod memory;
pub mod optim;
pub mod params;
pub mod rng;
pub mod synth;
pub mod tagger;
pub mod tensor;

pub use error::{Error, Result};
