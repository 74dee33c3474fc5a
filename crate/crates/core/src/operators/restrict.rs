use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Content, Delta};
use crate::network::{
    all_outputs, NodeClass, OpError, Operator, Ports, Properties, SlotDeltas, SlotId, SlotTable,
    UpdateInput, Valuation,
};

use super::common::{assignment_vars, emit, expect_vars, props, set_of, tuple_changes};

/// In-place restriction `target := target ∩ filter`; only ever deletes.
///
/// Both slots hold the same variables; `target` is read and written.
#[derive(Debug, Clone)]
pub struct Restrict {
    target: SlotId,
    filter: SlotId,
    probes: u64,
}

impl Restrict {
    pub fn new(target: &str, filter: &str) -> Self {
        Restrict {
            target: target.into(),
            filter: filter.into(),
            probes: 0,
        }
    }
}

impl Operator for Restrict {
    fn type_name(&self) -> &'static str {
        "restrict"
    }

    fn class(&self) -> NodeClass {
        NodeClass::Query
    }

    fn ports(&self) -> Ports {
        Ports {
            inputs: vec![self.target.clone(), self.filter.clone()],
            outputs: vec![self.target.clone()],
        }
    }

    fn bind(&mut self, slots: &SlotTable) -> Result<(), String> {
        let t = assignment_vars(slots, &self.target)?;
        let f = assignment_vars(slots, &self.filter)?;
        expect_vars(&self.filter, &f, &t)
    }

    fn load(&mut self, _val: &Valuation) -> Result<(), OpError> {
        Ok(())
    }

    fn update(&mut self, input: UpdateInput<'_>) -> Result<SlotDeltas, OpError> {
        let target = input.valuation.assignment(&self.target);
        let filter = input.valuation.assignment(&self.filter);
        let mut raw = Vec::new();
        let touched = tuple_changes(input.deltas(&self.target))
            .chain(tuple_changes(input.deltas(&self.filter)));
        for (_, t) in touched {
            self.probes += 1;
            if target.contains(t) && !filter.contains(t) {
                raw.push(Delta::RemoveTuple(t.clone()));
            }
        }
        Ok(emit(input.valuation, &self.target, raw))
    }

    fn dir_delta(&self, _changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        all_outputs(&self.ports())
    }

    fn batch(&self, val: &Valuation) -> Result<BTreeMap<SlotId, Content>, OpError> {
        let target = val.assignment(&self.target);
        let filter = val.assignment(&self.filter);
        let kept = target.tuples().filter(|t| filter.contains(t)).cloned();
        Ok(BTreeMap::from([(
            self.target.clone(),
            Content::Assignment(set_of(target.variables(), kept)),
        )]))
    }

    fn properties(&self) -> Properties {
        props(true)
    }

    fn probes(&self) -> u64 {
        self.probes
    }

    fn box_clone(&self) -> Box<dyn Operator> {
        Box::new(self.clone())
    }
}
