use thiserror::Error;

use super::value::ValueKind;

/// Failures raised while applying deltas or resolving references.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("vertex `{0}` already exists")]
    DuplicateVertex(String),
    #[error("edge `{0}` already exists")]
    DuplicateEdge(String),
    #[error("vertex `{0}` does not exist")]
    MissingVertex(String),
    #[error("edge `{0}` does not exist")]
    MissingEdge(String),
    #[error("vertex `{vertex}` still has {count} adjacent edge(s)")]
    AdjacentEdges { vertex: String, count: usize },
    #[error("edge `{edge}` references missing endpoint `{endpoint}`")]
    MissingEndpoint { edge: String, endpoint: String },
    #[error("edge `{0}` has an external endpoint but the graph is not a linking model")]
    ExternalInRegularGraph(String),
    #[error("removal of `{0}` does not match the stored element")]
    ElementMismatch(String),
    #[error("payload of vertex `{0}` must be a primitive value")]
    PayloadNotPrimitive(String),
    #[error("tuple {0} already present")]
    DuplicateTuple(String),
    #[error("tuple {0} not present")]
    MissingTuple(String),
    #[error("tuple {tuple} has arity {got}, expected {expected}")]
    Arity {
        tuple: String,
        expected: usize,
        got: usize,
    },
    #[error("value for variable `{var}` must be {expected}, got {got}")]
    TupleKind {
        var: String,
        expected: ValueKind,
        got: ValueKind,
    },
    #[error("{0} delta applied to incompatible content")]
    KindMismatch(&'static str),
    #[error("variable lists differ")]
    SchemaMismatch,
    #[error("typing violation: {0}")]
    Typing(String),
    #[error("external reference `{0}` not found")]
    NotFound(String),
}
