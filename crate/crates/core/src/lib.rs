//! Incremental instance-aware semantic mapping.

pub mod error;
pub mod geometry;

pub use error::{Error, Result};
pub mod detections;
pub mod label_fusion;
pub mod association;
pub mod eval;
pub mod pipeline;
pub mod synth;
