use std::collections::BTreeMap;

use crate::model::{AssignmentSet, Content, GraphLookup, TypedGraph};

use super::slot::SlotId;

/// Total mapping from slots to contents.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Valuation {
    contents: BTreeMap<SlotId, Content>,
}

impl Valuation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, slot: &str) -> Option<&Content> {
        self.contents.get(slot)
    }

    /// Panics when `slot` is unknown; operators only read slots they are wired to.
    pub fn content(&self, slot: &str) -> &Content {
        self.contents
            .get(slot)
            .unwrap_or_else(|| panic!("slot `{slot}` missing from valuation"))
    }

    pub fn model(&self, slot: &str) -> &TypedGraph {
        self.content(slot)
            .as_model()
            .unwrap_or_else(|| panic!("slot `{slot}` does not hold a model"))
    }

    pub fn assignment(&self, slot: &str) -> &AssignmentSet {
        self.content(slot)
            .as_assignment()
            .unwrap_or_else(|| panic!("slot `{slot}` does not hold assignments"))
    }

    pub(crate) fn get_mut(&mut self, slot: &str) -> Option<&mut Content> {
        self.contents.get_mut(slot)
    }

    pub(crate) fn set(&mut self, slot: impl Into<SlotId>, content: Content) {
        self.contents.insert(slot.into(), content);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SlotId, &Content)> {
        self.contents.iter()
    }

    pub fn slots(&self) -> impl Iterator<Item = &SlotId> {
        self.contents.keys()
    }
}

impl GraphLookup for Valuation {
    fn graph_by_id(&self, id: &str) -> Option<&TypedGraph> {
        match self.contents.get(id) {
            Some(Content::Model(g)) => Some(g),
            _ => self
                .contents
                .values()
                .filter_map(Content::as_model)
                .find(|g| g.id() == id),
        }
    }
}
