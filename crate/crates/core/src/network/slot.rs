use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{AssignmentSet, Content, TypeGraph, TypeGraphs, TypedGraph, Variable};

pub type SlotId = String;
pub type OpId = String;

/// Domain of a slot: a modeling language or an ordered variable list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum SlotKind {
    #[serde(rename_all = "camelCase")]
    Model {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        type_graph: Option<String>,
        #[serde(default)]
        linking: bool,
    },
    Assignment { vars: Vec<Variable> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub id: SlotId,
    pub kind: SlotKind,
}

impl Slot {
    pub fn model(id: impl Into<String>, type_graph: Option<&str>) -> Self {
        Slot {
            id: id.into(),
            kind: SlotKind::Model {
                type_graph: type_graph.map(str::to_string),
                linking: false,
            },
        }
    }

    pub fn linking(id: impl Into<String>, type_graph: Option<&str>) -> Self {
        Slot {
            id: id.into(),
            kind: SlotKind::Model {
                type_graph: type_graph.map(str::to_string),
                linking: true,
            },
        }
    }

    pub fn assignment(id: impl Into<String>, vars: Vec<Variable>) -> Self {
        Slot {
            id: id.into(),
            kind: SlotKind::Assignment { vars },
        }
    }

    pub fn is_model(&self) -> bool {
        matches!(self.kind, SlotKind::Model { .. })
    }

    pub fn vars(&self) -> Option<&[Variable]> {
        match &self.kind {
            SlotKind::Assignment { vars } => Some(vars),
            SlotKind::Model { .. } => None,
        }
    }

    /// Empty content of this slot's domain.
    pub fn empty_content(&self) -> Content {
        match &self.kind {
            SlotKind::Model { linking, .. } => {
                let mut g = TypedGraph::new(self.id.clone());
                g.set_linking(*linking);
                Content::Model(g)
            }
            SlotKind::Assignment { vars } => Content::Assignment(AssignmentSet::new(vars.clone())),
        }
    }

    pub fn type_graph<'a>(&self, tgs: &'a TypeGraphs) -> Option<&'a TypeGraph> {
        match &self.kind {
            SlotKind::Model {
                type_graph: Some(name),
                ..
            } => tgs.get(name),
            _ => None,
        }
    }
}

/// Slots by id, as seen by operators while binding.
pub type SlotTable = BTreeMap<SlotId, Slot>;
