//! Text formats: network specs (JSON), slot contents (JSON) and delta scripts.

mod script;
mod spec;

pub use script::{DeltaScript, ScriptError, ScriptGroup, ScriptOp};
pub use spec::{
    content_from_json, content_to_json, NetworkSpec, OpSpec, Registry, SlotSpec, SpecError,
};
