use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Content, DeltaSeq, ModelError};

use super::slot::{SlotId, SlotTable};
use super::valuation::Valuation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeClass {
    Query,
    Transformation,
    Mixed,
}

impl fmt::Display for NodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeClass::Query => "query",
            NodeClass::Transformation => "transformation",
            NodeClass::Mixed => "mixed",
        })
    }
}

/// Declared behavioral properties of an operation node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Properties {
    pub non_recursive: bool,
    pub union_monotonic: bool,
    pub fully_incremental: bool,
}

/// Errors raised by operators while updating or recomputing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpError {
    #[error("EvalError: {0}")]
    Eval(String),
    #[error("ConsistencyError: {0}")]
    Consistency(String),
    #[error("ConflictError: {0}")]
    Conflict(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("sub-network failed: {0}")]
    Child(String),
}

/// Input and output slots of an operation, in role order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Ports {
    pub inputs: Vec<SlotId>,
    pub outputs: Vec<SlotId>,
}

/// Output deltas per output slot.
pub type SlotDeltas = BTreeMap<SlotId, DeltaSeq>;

/// What an update procedure gets to see: current contents and the deltas
/// cached since the node last ran.
#[derive(Clone, Copy)]
pub struct UpdateInput<'a> {
    pub valuation: &'a Valuation,
    pub cache: &'a BTreeMap<SlotId, DeltaSeq>,
}

impl<'a> UpdateInput<'a> {
    pub fn deltas(&self, slot: &str) -> &'a [crate::model::Delta] {
        self.cache.get(slot).map_or(&[], Vec::as_slice)
    }
}

/// Behavioral contract of an operation node.
///
/// Implementations keep whatever indices they need; `load` rebuilds them
/// from a valuation assumed consistent with the node's semantics.
pub trait Operator: fmt::Debug + Send {
    fn type_name(&self) -> &'static str;

    fn class(&self) -> NodeClass;

    fn ports(&self) -> Ports;

    /// Checks slot domains and resolves schemas; called once by the network builder.
    fn bind(&mut self, slots: &SlotTable) -> Result<(), String>;

    /// Drops internal state and rebuilds it from `val`.
    fn load(&mut self, val: &Valuation) -> Result<(), OpError>;

    /// Turns cached deltas into output deltas.
    fn update(&mut self, input: UpdateInput<'_>) -> Result<SlotDeltas, OpError>;

    /// Output slots that may receive deltas when only `changed` inputs changed.
    fn dir_delta(&self, changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId>;

    /// Non-incremental realization of the semantics, used as oracle.
    fn batch(&self, val: &Valuation) -> Result<BTreeMap<SlotId, Content>, OpError>;

    /// Whether the output contents are consistent with the inputs.
    fn is_consistent(&self, val: &Valuation) -> Result<bool, OpError> {
        let expected = self.batch(val)?;
        Ok(expected
            .iter()
            .all(|(slot, content)| val.get(slot) == Some(content)))
    }

    fn properties(&self) -> Properties;

    /// Index probes performed so far, for incrementality checks.
    fn probes(&self) -> u64 {
        0
    }

    fn box_clone(&self) -> Box<dyn Operator>;
}

impl Clone for Box<dyn Operator> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Every output slot, for operators whose directions are "all".
pub(crate) fn all_outputs(ports: &Ports) -> BTreeSet<SlotId> {
    ports.outputs.iter().cloned().collect()
}
