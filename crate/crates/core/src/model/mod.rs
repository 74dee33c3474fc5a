//! Typed graphs, assignment sets, and the delta algebra over them.

mod assignment;
mod delta;
mod error;
mod graph;
mod types;
mod value;

pub use assignment::{check_tuple, AssignmentSet, Tuple, Variable};
pub use delta::{
    apply_delta, diff, normalize, normalize_tuples, resolve_external, seed_deltas, Content,
    Delta, DeltaSeq, GraphLookup, GraphPatch,
};
pub use error::ModelError;
pub use graph::{Edge, Endpoint, ExternalRef, TypedGraph, Vertex};
pub use types::{check_typing, EdgeType, TypeGraph, TypeGraphs, TypingReport};
pub use value::{is_ident, Value, ValueKind};
