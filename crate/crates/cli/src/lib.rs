//! Command-line pipeline: synthetic data, training, explanation, evaluation
//! and gradient self-checks.

pub mod args;
pub mod commands;
pub mod manifest;

pub use commands::{run, UsageError};
