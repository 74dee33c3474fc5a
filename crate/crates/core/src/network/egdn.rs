use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{Content, DeltaSeq, TypeGraph, TypeGraphs};

use super::error::NetworkError;
use super::operator::{NodeClass, OpError, Operator};
use super::slot::{OpId, Slot, SlotId, SlotTable};
use super::valuation::Valuation;

/// Who produced an edit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Origin {
    User,
    Operation(OpId),
}

/// Audit entry for one applied delta sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRecord {
    pub slot: SlotId,
    pub deltas: DeltaSeq,
    pub origin: Origin,
}

/// An operation node together with its wiring and delta cache.
#[derive(Debug, Clone)]
pub struct OpNode {
    pub id: OpId,
    pub class: NodeClass,
    pub inputs: Vec<SlotId>,
    pub outputs: Vec<SlotId>,
    pub(crate) op: Box<dyn Operator>,
    /// Keys are always a subset of `inputs ∪ outputs`.
    pub(crate) cache: BTreeMap<SlotId, DeltaSeq>,
}

impl OpNode {
    pub fn operator(&self) -> &dyn Operator {
        self.op.as_ref()
    }

    pub fn cache(&self) -> &BTreeMap<SlotId, DeltaSeq> {
        &self.cache
    }

    pub fn has_pending(&self) -> bool {
        self.cache.values().any(|d| !d.is_empty())
    }

    pub fn reads(&self, slot: &str) -> bool {
        self.inputs.iter().any(|s| s == slot)
    }

    pub fn writes(&self, slot: &str) -> bool {
        self.outputs.iter().any(|s| s == slot)
    }

    pub(crate) fn push_cache(&mut self, slot: &str, deltas: &[crate::model::Delta]) {
        if !deltas.is_empty() {
            self.cache
                .entry(slot.to_string())
                .or_default()
                .extend_from_slice(deltas);
        }
    }
}

/// Bipartite network of operation nodes and slots.
#[derive(Debug, Clone, Default)]
pub struct Egdn {
    slots: SlotTable,
    ops: BTreeMap<OpId, OpNode>,
    readers: BTreeMap<SlotId, BTreeSet<OpId>>,
    writers: BTreeMap<SlotId, BTreeSet<OpId>>,
    type_graphs: TypeGraphs,
    audit: Option<Vec<EditRecord>>,
}

impl Egdn {
    pub fn builder() -> EgdnBuilder {
        EgdnBuilder::default()
    }

    pub fn slots(&self) -> &SlotTable {
        &self.slots
    }

    pub fn slot(&self, id: &str) -> Option<&Slot> {
        self.slots.get(id)
    }

    pub fn ops(&self) -> impl Iterator<Item = &OpNode> {
        self.ops.values()
    }

    pub fn op(&self, id: &str) -> Option<&OpNode> {
        self.ops.get(id)
    }

    pub(crate) fn op_mut(&mut self, id: &str) -> Option<&mut OpNode> {
        self.ops.get_mut(id)
    }

    pub fn op_ids(&self) -> impl Iterator<Item = &OpId> {
        self.ops.keys()
    }

    pub fn type_graphs(&self) -> &TypeGraphs {
        &self.type_graphs
    }

    pub fn type_graph_of(&self, slot: &str) -> Option<&TypeGraph> {
        self.slots.get(slot)?.type_graph(&self.type_graphs)
    }

    /// Operations reading `slot`.
    pub fn readers(&self, slot: &str) -> impl Iterator<Item = &OpId> {
        self.readers.get(slot).into_iter().flatten()
    }

    /// Operations writing `slot`.
    pub fn writers(&self, slot: &str) -> impl Iterator<Item = &OpId> {
        self.writers.get(slot).into_iter().flatten()
    }

    /// Operations adjacent to `slot` in either direction.
    pub fn adjacent(&self, slot: &str) -> BTreeSet<OpId> {
        self.readers(slot).chain(self.writers(slot)).cloned().collect()
    }

    /// A slot some operation writes without also reading it.
    pub fn is_pure_output(&self, slot: &str) -> bool {
        self.writers(slot)
            .any(|o| !self.ops[o].reads(slot))
    }

    /// Slots users may edit: everything that is not a pure output.
    pub fn user_slots(&self) -> impl Iterator<Item = &SlotId> {
        self.slots.keys().filter(|s| !self.is_pure_output(s))
    }

    /// Valuation with every slot at its empty content.
    pub fn empty_valuation(&self) -> Valuation {
        let mut val = Valuation::new();
        for slot in self.slots.values() {
            val.set(slot.id.clone(), slot.empty_content());
        }
        val
    }

    /// Rebuilds every operator's internal state from `val` and drops all caches.
    pub fn load(&mut self, val: &Valuation) -> Result<(), OpError> {
        for node in self.ops.values_mut() {
            node.cache.clear();
            node.op.load(val)?;
        }
        Ok(())
    }

    pub fn enable_audit(&mut self) {
        self.audit.get_or_insert_with(Vec::new);
    }

    pub fn audit_log(&self) -> &[EditRecord] {
        self.audit.as_deref().unwrap_or(&[])
    }

    /// Drains the audit log, keeping auditing enabled.
    pub(crate) fn take_audit(&mut self) -> Vec<EditRecord> {
        self.audit.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub(crate) fn log(&mut self, slot: &str, deltas: &[crate::model::Delta], origin: Origin) {
        if let Some(log) = &mut self.audit {
            log.push(EditRecord {
                slot: slot.to_string(),
                deltas: deltas.to_vec(),
                origin,
            });
        }
    }

    /// Applies a user edit and notifies every adjacent operation.
    ///
    /// With `enforce` set, edits to pure-output slots are rejected.
    pub fn record_edit(
        &mut self,
        val: &mut Valuation,
        slot: &str,
        deltas: &[crate::model::Delta],
        enforce: bool,
    ) -> Result<(), NetworkError> {
        if !self.slots.contains_key(slot) {
            return Err(NetworkError::UnknownSlot(slot.to_string()));
        }
        if enforce && self.is_pure_output(slot) {
            return Err(NetworkError::PureOutputEdit(slot.to_string()));
        }
        let tg = self.type_graph_of(slot).cloned();
        let content = val
            .get_mut(slot)
            .ok_or_else(|| NetworkError::UnknownSlot(slot.to_string()))?;
        content
            .apply_checked(deltas, tg.as_ref())
            .map_err(|source| NetworkError::Content {
                slot: slot.to_string(),
                source,
            })?;
        for o in self.adjacent(slot) {
            self.ops.get_mut(&o).expect("adjacency is consistent").push_cache(slot, deltas);
        }
        self.log(slot, deltas, Origin::User);
        Ok(())
    }

    /// Whether `op`'s outputs agree with its semantics on `val`.
    ///
    /// Operator errors count as invalid.
    pub fn op_valid(&self, op: &str, val: &Valuation) -> bool {
        self.ops
            .get(op)
            .is_some_and(|n| n.op.is_consistent(val).unwrap_or(false))
    }

    /// First operation (by id) whose outputs are inconsistent, if any.
    pub fn first_invalid(&self, val: &Valuation) -> Option<&OpId> {
        self.ops.keys().find(|o| !self.op_valid(o, val))
    }

    pub fn network_valid(&self, val: &Valuation) -> bool {
        self.first_invalid(val).is_none()
    }

    /// Graphviz rendering: slots as ellipses, operations as boxes.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph egdn {\n  rankdir=LR;\n");
        for slot in self.slots.values() {
            let shape = if slot.is_model() { "ellipse" } else { "note" };
            let _ = writeln!(out, "  \"{}\" [shape={shape}];", slot.id);
        }
        for node in self.ops.values() {
            let _ = writeln!(
                out,
                "  \"{}\" [shape=box, label=\"{}\\n{}\"];",
                node.id,
                node.id,
                node.op.type_name()
            );
            for s in &node.inputs {
                let _ = writeln!(out, "  \"{s}\" -> \"{}\";", node.id);
            }
            for s in &node.outputs {
                let _ = writeln!(out, "  \"{}\" -> \"{s}\";", node.id);
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Collects slots and operations, then validates the structure in one go.
#[derive(Debug, Default)]
pub struct EgdnBuilder {
    type_graphs: TypeGraphs,
    slots: Vec<Slot>,
    ops: Vec<(OpId, Option<NodeClass>, Box<dyn Operator>)>,
}

impl EgdnBuilder {
    pub fn type_graph(mut self, name: &str, tg: TypeGraph) -> Self {
        self.type_graphs.insert(name.to_string(), tg);
        self
    }

    pub fn slot(mut self, slot: Slot) -> Self {
        self.slots.push(slot);
        self
    }

    /// Adds an operation with the operator's natural class.
    pub fn op(mut self, id: &str, op: impl Operator + 'static) -> Self {
        self.ops.push((id.to_string(), None, Box::new(op)));
        self
    }

    /// Adds an operation with an explicitly declared class.
    pub fn op_boxed(mut self, id: &str, class: Option<NodeClass>, op: Box<dyn Operator>) -> Self {
        self.ops.push((id.to_string(), class, op));
        self
    }

    pub fn build(self) -> Result<Egdn, NetworkError> {
        let mut net = Egdn {
            type_graphs: self.type_graphs,
            ..Egdn::default()
        };
        for (name, tg) in &net.type_graphs {
            tg.validate().map_err(|reason| NetworkError::TypeGraph {
                name: name.clone(),
                reason,
            })?;
        }
        for slot in self.slots {
            if let Some(name) = slot_type_graph(&slot) {
                if !net.type_graphs.contains_key(name) {
                    return Err(NetworkError::TypeGraph {
                        name: name.to_string(),
                        reason: format!("referenced by slot `{}` but not declared", slot.id),
                    });
                }
            }
            if net.slots.insert(slot.id.clone(), slot.clone()).is_some() {
                return Err(NetworkError::DuplicateId(slot.id));
            }
        }
        let op_ids: BTreeSet<String> = self.ops.iter().map(|(id, _, _)| id.clone()).collect();
        for (id, class, mut op) in self.ops {
            if net.slots.contains_key(&id) || net.ops.contains_key(&id) {
                return Err(NetworkError::DuplicateId(id));
            }
            let ports = op.ports();
            for port in ports.inputs.iter().chain(&ports.outputs) {
                if op_ids.contains(port) {
                    return Err(NetworkError::BipartitenessViolation {
                        op: id,
                        target: port.clone(),
                    });
                }
                if !net.slots.contains_key(port) {
                    return Err(NetworkError::UnknownSlot(port.clone()));
                }
            }
            let class = class.unwrap_or_else(|| op.class());
            check_class(&id, class, &ports.outputs, &net.slots)?;
            op.bind(&net.slots)
                .map_err(|reason| NetworkError::DomainMismatch {
                    op: id.clone(),
                    reason,
                })?;
            for s in &ports.inputs {
                net.readers.entry(s.clone()).or_default().insert(id.clone());
            }
            for s in &ports.outputs {
                net.writers.entry(s.clone()).or_default().insert(id.clone());
            }
            net.ops.insert(
                id.clone(),
                OpNode {
                    id,
                    class,
                    inputs: ports.inputs,
                    outputs: ports.outputs,
                    op,
                    cache: BTreeMap::new(),
                },
            );
        }
        check_shared_outputs(&net)?;
        Ok(net)
    }
}

fn slot_type_graph(slot: &Slot) -> Option<&str> {
    match &slot.kind {
        super::slot::SlotKind::Model {
            type_graph: Some(name),
            ..
        } => Some(name),
        _ => None,
    }
}

fn check_class(
    id: &str,
    class: NodeClass,
    outputs: &[SlotId],
    slots: &SlotTable,
) -> Result<(), NetworkError> {
    match class {
        NodeClass::Query => {
            if outputs.len() != 1 {
                return Err(NetworkError::ArityViolation(format!(
                    "query node `{id}` has {} output slots, expected exactly 1",
                    outputs.len()
                )));
            }
            if slots[&outputs[0]].is_model() {
                return Err(NetworkError::ArityViolation(format!(
                    "query node `{id}` writes model slot `{}`",
                    outputs[0]
                )));
            }
        }
        NodeClass::Transformation => {
            if let Some(s) = outputs.iter().find(|s| !slots[*s].is_model()) {
                return Err(NetworkError::DomainMismatch {
                    op: id.to_string(),
                    reason: format!("transformation output `{s}` is not a model slot"),
                });
            }
        }
        NodeClass::Mixed => {}
    }
    Ok(())
}

fn check_shared_outputs(net: &Egdn) -> Result<(), NetworkError> {
    for (slot, writers) in &net.writers {
        let writers: Vec<&OpId> = writers.iter().collect();
        for (i, a) in writers.iter().enumerate() {
            for b in &writers[i + 1..] {
                if !(net.ops[*a].reads(slot) && net.ops[*b].reads(slot)) {
                    return Err(NetworkError::SharedOutputViolation {
                        slot: slot.clone(),
                        first: (*a).clone(),
                        second: (*b).clone(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Builds a network and a valuation from `initial`, empty elsewhere.
///
/// Operators are loaded from the resulting valuation, which the caller
/// asserts to be consistent.
pub fn build_network(
    builder: EgdnBuilder,
    initial: BTreeMap<SlotId, Content>,
) -> Result<(Egdn, Valuation), NetworkError> {
    let mut net = builder.build()?;
    let mut val = net.empty_valuation();
    for (slot, content) in initial {
        let Some(decl) = net.slot(&slot) else {
            return Err(NetworkError::UnknownSlot(slot));
        };
        let mut fresh = decl.empty_content();
        fresh
            .apply_checked(&content.seed_deltas(), decl.type_graph(&net.type_graphs))
            .map_err(|source| NetworkError::Content {
                slot: slot.clone(),
                source,
            })?;
        val.set(slot, fresh);
    }
    net.load(&val)
        .map_err(|e| NetworkError::Load(e.to_string()))?;
    Ok((net, val))
}
