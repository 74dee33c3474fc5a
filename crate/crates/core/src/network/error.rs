use thiserror::Error;

use crate::model::ModelError;

/// Structural violations and edit rejections at the network level.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("BipartitenessViolation: operation `{op}` is wired to operation `{target}`")]
    BipartitenessViolation { op: String, target: String },
    #[error("ArityViolation: {0}")]
    ArityViolation(String),
    #[error("SharedOutputViolation: slot `{slot}` is written by `{first}` and `{second}` without being an input of both")]
    SharedOutputViolation {
        slot: String,
        first: String,
        second: String,
    },
    #[error("DomainMismatch: operation `{op}`: {reason}")]
    DomainMismatch { op: String, reason: String },
    #[error("unknown slot `{0}`")]
    UnknownSlot(String),
    #[error("unknown operation `{0}`")]
    UnknownOp(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("type graph `{name}`: {reason}")]
    TypeGraph { name: String, reason: String },
    #[error("PolicyViolation: slot `{0}` is a pure output and cannot be edited")]
    PureOutputEdit(String),
    #[error("operator state could not be loaded: {0}")]
    Load(String),
    #[error("content of slot `{slot}`: {source}")]
    Content { slot: String, source: ModelError },
}
