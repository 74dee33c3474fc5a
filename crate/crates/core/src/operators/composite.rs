use std::collections::{BTreeMap, BTreeSet};

use crate::model::{normalize, Content, DeltaSeq};
use crate::network::{
    Egdn, NodeClass, OpError, Operator, Origin, Ports, Properties, SlotDeltas, SlotId, SlotKind,
    SlotTable, UpdateInput, Valuation,
};
use crate::scheduler::{
    batch_execute, execute, find_valid_update_order, ExecOptions, Outcome, Strategy,
};

/// A whole network used as one operation.
///
/// Parent input slots feed child slots as user edits; deltas the child's
/// operations write into bound output slots are reported to the parent.
#[derive(Debug, Clone)]
pub struct Composite {
    child: Egdn,
    state: Valuation,
    inputs: Vec<(SlotId, SlotId)>,
    outputs: Vec<(SlotId, SlotId)>,
    fallback: bool,
}

fn kinds_match(a: &SlotKind, b: &SlotKind) -> bool {
    match (a, b) {
        (SlotKind::Model { linking: x, .. }, SlotKind::Model { linking: y, .. }) => x == y,
        (SlotKind::Assignment { vars: x }, SlotKind::Assignment { vars: y }) => x == y,
        _ => false,
    }
}

impl Composite {
    /// `inputs` and `outputs` are `(parent slot, child slot)` bindings.
    pub fn new(
        mut child: Egdn,
        inputs: &[(&str, &str)],
        outputs: &[(&str, &str)],
    ) -> Result<Self, String> {
        let own = |v: &[(&str, &str)]| -> Vec<(SlotId, SlotId)> {
            v.iter().map(|(p, c)| (p.to_string(), c.to_string())).collect()
        };
        let (inputs, outputs) = (own(inputs), own(outputs));
        for (_, c) in inputs.iter().chain(&outputs) {
            if child.slot(c).is_none() {
                return Err(format!("child network has no slot `{c}`"));
            }
        }
        if let Some((_, c)) = inputs.iter().find(|(_, c)| child.is_pure_output(c)) {
            return Err(format!("child slot `{c}` is written by the child and cannot be an input"));
        }
        child.enable_audit();
        let state = child.empty_valuation();
        Ok(Composite {
            child,
            state,
            inputs,
            outputs,
            fallback: true,
        })
    }

    /// Disables the fixpoint fallback for the child run.
    pub fn without_fallback(mut self) -> Self {
        self.fallback = false;
        self
    }

    pub fn child(&self) -> &Egdn {
        &self.child
    }

    fn options(&self) -> ExecOptions {
        ExecOptions {
            strategy: Strategy::Ordered,
            fallback: self.fallback,
            ..ExecOptions::default()
        }
    }

    fn child_base(&self, val: &Valuation) -> BTreeMap<SlotId, Content> {
        self.inputs
            .iter()
            .map(|(p, c)| (c.clone(), val.content(p).clone()))
            .collect()
    }

    fn child_err(e: impl std::fmt::Display) -> OpError {
        OpError::Child(e.to_string())
    }

    /// Runs the child from scratch on the parent's input contents.
    fn recompute(&self, val: &Valuation) -> Result<(Egdn, Valuation), OpError> {
        let mut child = self.child.clone();
        let (state, report) =
            batch_execute(&mut child, &self.child_base(val), &self.options()).map_err(Self::child_err)?;
        if report.outcome != Outcome::Completed {
            return Err(OpError::Child(format!("child run ended with {}", report.outcome)));
        }
        child.take_audit();
        Ok((child, state))
    }
}

impl Operator for Composite {
    fn type_name(&self) -> &'static str {
        "composite"
    }

    fn class(&self) -> NodeClass {
        let models = self
            .outputs
            .iter()
            .filter(|(_, c)| self.child.slot(c).is_some_and(|s| s.is_model()))
            .count();
        if models == self.outputs.len() {
            NodeClass::Transformation
        } else if self.outputs.len() == 1 {
            NodeClass::Query
        } else {
            NodeClass::Mixed
        }
    }

    fn ports(&self) -> Ports {
        Ports {
            inputs: self.inputs.iter().map(|(p, _)| p.clone()).collect(),
            outputs: self.outputs.iter().map(|(p, _)| p.clone()).collect(),
        }
    }

    fn bind(&mut self, slots: &SlotTable) -> Result<(), String> {
        for (p, c) in self.inputs.iter().chain(&self.outputs) {
            let parent = slots.get(p).ok_or_else(|| format!("unknown slot `{p}`"))?;
            let inner = self.child.slot(c).expect("checked at construction");
            if !kinds_match(&parent.kind, &inner.kind) {
                return Err(format!("slot `{p}` does not match child slot `{c}`"));
            }
        }
        Ok(())
    }

    fn load(&mut self, val: &Valuation) -> Result<(), OpError> {
        let (child, state) = self.recompute(val)?;
        self.child = child;
        self.state = state;
        Ok(())
    }

    fn update(&mut self, input: UpdateInput<'_>) -> Result<SlotDeltas, OpError> {
        for (p, c) in &self.inputs {
            let deltas = input.deltas(p);
            if !deltas.is_empty() {
                self.child
                    .record_edit(&mut self.state, c, deltas, false)
                    .map_err(Self::child_err)?;
            }
        }
        self.child.take_audit();
        let opts = self.options();
        let report = execute(&mut self.child, &mut self.state, &opts).map_err(Self::child_err)?;
        if report.outcome != Outcome::Completed {
            return Err(OpError::Child(format!("child run ended with {}", report.outcome)));
        }
        let mut raw: BTreeMap<&str, DeltaSeq> = BTreeMap::new();
        for rec in self.child.take_audit() {
            if !matches!(rec.origin, Origin::Operation(_)) {
                continue;
            }
            for (p, c) in &self.outputs {
                if *c == rec.slot {
                    raw.entry(p.as_str()).or_default().extend(rec.deltas.iter().cloned());
                }
            }
        }
        Ok(raw
            .into_iter()
            .map(|(p, deltas)| (p.to_string(), normalize(input.valuation.content(p), &deltas)))
            .collect())
    }

    fn dir_delta(&self, changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        let inner: BTreeSet<SlotId> = self
            .inputs
            .iter()
            .filter(|(p, _)| changed.contains(p))
            .map(|(_, c)| c.clone())
            .collect();
        let all = || self.outputs.iter().map(|(p, _)| p.clone()).collect();
        match find_valid_update_order(&self.child, &inner) {
            Ok(a) if a.order.is_some() => self
                .outputs
                .iter()
                .filter(|(_, c)| a.closure.contains(c))
                .map(|(p, _)| p.clone())
                .collect(),
            _ => all(),
        }
    }

    fn batch(&self, val: &Valuation) -> Result<BTreeMap<SlotId, Content>, OpError> {
        let (_, state) = self.recompute(val)?;
        Ok(self
            .outputs
            .iter()
            .map(|(p, c)| (p.clone(), state.content(c).clone()))
            .collect())
    }

    fn properties(&self) -> Properties {
        let children: Vec<Properties> =
            self.child.ops().map(|n| n.operator().properties()).collect();
        let ins: BTreeSet<&SlotId> = self.inputs.iter().map(|(p, _)| p).collect();
        let disjoint = self.outputs.iter().all(|(p, _)| !ins.contains(p));
        Properties {
            non_recursive: disjoint && children.iter().all(|p| p.non_recursive),
            union_monotonic: children.iter().all(|p| p.union_monotonic),
            fully_incremental: false,
        }
    }

    fn probes(&self) -> u64 {
        self.child.ops().map(|n| n.operator().probes()).sum()
    }

    fn box_clone(&self) -> Box<dyn Operator> {
        Box::new(self.clone())
    }
}
