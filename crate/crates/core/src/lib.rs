//! Cell-graph construction, GIN graph classification and compact node-mask
//! explanations.
//!
//! The pipeline turns per-RoI nucleus records into thresholded kNN cell
//! graphs ([`graph`]), trains a GIN classifier on them ([`cgnn`]), and
//! explains individual predictions by optimizing a sigmoid node mask under a
//! distillation + size + entropy objective ([`explainer`]). [`metrics`]
//! aggregates classifier quality, explanation compactness and cross-entropy
//! comparisons against a size-matched random baseline.

pub mod cgnn;
pub mod data;
pub mod error;
pub mod explainer;
pub mod graph;
pub mod json;
pub mod metrics;
pub mod numerics;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
