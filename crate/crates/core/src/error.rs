use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("diverged: {0}")]
    Diverged(String),
    #[error("empty RoI")]
    EmptyRoi,
    #[error("invalid feature: {0}")]
    InvalidFeature(String),
    #[error("empty explanation")]
    EmptyExplanation,
    #[error("invalid node index {index} for graph with {num_nodes} nodes")]
    NodeIndex { index: usize, num_nodes: usize },
    #[error("schema violation in {record}: {field}: {reason}")]
    Schema {
        record: String,
        field: String,
        reason: String,
    },
    #[error("split overlap: RoI id {0:?} appears in more than one split")]
    SplitOverlap(String),
    #[error("label {label} out of range for {num_classes} classes (record {record})")]
    LabelOutOfRange {
        record: String,
        label: usize,
        num_classes: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("feature dimension mismatch: model expects {expected}, graph has {found}")]
    FeatureDim { expected: usize, found: usize },
    #[error("class count mismatch: expected {expected}, found {found}")]
    ClassCount { expected: usize, found: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("missing planted relevance set for RoI {0}")]
    MissingPlanted(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
