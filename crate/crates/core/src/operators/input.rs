use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Content, Delta, Edge, Tuple, TypedGraph, Value, ValueKind, Variable};
use crate::network::{
    all_outputs, NodeClass, OpError, Operator, Ports, Properties, SlotDeltas, SlotId, SlotTable,
    UpdateInput, Valuation,
};

use super::common::{assignment_vars, emit, expect_vars, model_slot, props, set_of};

/// Extracts the vertices of one type: `(v)` or `(v, payload)`.
#[derive(Debug, Clone)]
pub struct NodeInput {
    input: SlotId,
    output: SlotId,
    ty: String,
    payload: Option<ValueKind>,
    vars: Vec<Variable>,
    probes: u64,
}

impl NodeInput {
    pub fn new(input: &str, output: &str, ty: &str) -> Self {
        NodeInput {
            input: input.into(),
            output: output.into(),
            ty: ty.into(),
            payload: None,
            vars: Vec::new(),
            probes: 0,
        }
    }

    pub fn vertex_type(&self) -> &str {
        &self.ty
    }

    fn tuple(&self, v: &crate::model::Vertex) -> Option<Tuple> {
        if v.ty != self.ty {
            return None;
        }
        let id = Value::Vertex(v.id.clone());
        match self.payload {
            None => Some(Tuple::new(vec![id])),
            Some(kind) => match &v.payload {
                Some(p) if p.kind() == kind => Some(Tuple::new(vec![id, p.clone()])),
                _ => None,
            },
        }
    }
}

impl Operator for NodeInput {
    fn type_name(&self) -> &'static str {
        "node_input"
    }

    fn class(&self) -> NodeClass {
        NodeClass::Query
    }

    fn ports(&self) -> Ports {
        Ports {
            inputs: vec![self.input.clone()],
            outputs: vec![self.output.clone()],
        }
    }

    fn bind(&mut self, slots: &SlotTable) -> Result<(), String> {
        model_slot(slots, &self.input)?;
        let vars = assignment_vars(slots, &self.output)?;
        match vars.as_slice() {
            [v] if v.kind == ValueKind::Vertex => self.payload = None,
            [v, p] if v.kind == ValueKind::Vertex && p.kind.is_primitive() => {
                self.payload = Some(p.kind)
            }
            _ => {
                let want = [Variable::new("v", ValueKind::Vertex)];
                expect_vars(&self.output, &vars, &want)?;
            }
        }
        self.vars = vars;
        Ok(())
    }

    fn load(&mut self, _val: &Valuation) -> Result<(), OpError> {
        Ok(())
    }

    fn update(&mut self, input: UpdateInput<'_>) -> Result<SlotDeltas, OpError> {
        let mut raw = Vec::new();
        for d in input.deltas(&self.input) {
            self.probes += 1;
            match d {
                Delta::AddVertex(v) => raw.extend(self.tuple(v).map(Delta::AddTuple)),
                Delta::RemoveVertex(v) => raw.extend(self.tuple(v).map(Delta::RemoveTuple)),
                _ => {}
            }
        }
        Ok(emit(input.valuation, &self.output, raw))
    }

    fn dir_delta(&self, _changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        all_outputs(&self.ports())
    }

    fn batch(&self, val: &Valuation) -> Result<BTreeMap<SlotId, Content>, OpError> {
        let g: &TypedGraph = val.model(&self.input);
        let tuples = g.vertices_of_type(&self.ty).filter_map(|v| self.tuple(v));
        Ok(BTreeMap::from([(
            self.output.clone(),
            Content::Assignment(set_of(&self.vars, tuples)),
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

/// Extracts the edges of one type as `(e, s, t)`.
#[derive(Debug, Clone)]
pub struct EdgeInput {
    input: SlotId,
    output: SlotId,
    ty: String,
    vars: Vec<Variable>,
    probes: u64,
}

impl EdgeInput {
    pub fn new(input: &str, output: &str, ty: &str) -> Self {
        EdgeInput {
            input: input.into(),
            output: output.into(),
            ty: ty.into(),
            vars: Vec::new(),
            probes: 0,
        }
    }

    pub fn edge_type(&self) -> &str {
        &self.ty
    }

    fn tuple(&self, e: &Edge) -> Option<Tuple> {
        (e.ty == self.ty).then(|| {
            Tuple::new(vec![
                Value::Edge(e.id.clone()),
                Value::Vertex(e.src.to_string()),
                Value::Vertex(e.tgt.to_string()),
            ])
        })
    }
}

impl Operator for EdgeInput {
    fn type_name(&self) -> &'static str {
        "edge_input"
    }

    fn class(&self) -> NodeClass {
        NodeClass::Query
    }

    fn ports(&self) -> Ports {
        Ports {
            inputs: vec![self.input.clone()],
            outputs: vec![self.output.clone()],
        }
    }

    fn bind(&mut self, slots: &SlotTable) -> Result<(), String> {
        model_slot(slots, &self.input)?;
        let vars = assignment_vars(slots, &self.output)?;
        let kinds: Vec<ValueKind> = vars.iter().map(|v| v.kind).collect();
        if kinds != [ValueKind::Edge, ValueKind::Vertex, ValueKind::Vertex] {
            return Err(format!(
                "slot `{}` must have variables (edge, vertex, vertex)",
                self.output
            ));
        }
        self.vars = vars;
        Ok(())
    }

    fn load(&mut self, _val: &Valuation) -> Result<(), OpError> {
        Ok(())
    }

    fn update(&mut self, input: UpdateInput<'_>) -> Result<SlotDeltas, OpError> {
        let mut raw = Vec::new();
        for d in input.deltas(&self.input) {
            self.probes += 1;
            match d {
                Delta::AddEdge(e) => raw.extend(self.tuple(e).map(Delta::AddTuple)),
                Delta::RemoveEdge(e) => raw.extend(self.tuple(e).map(Delta::RemoveTuple)),
                _ => {}
            }
        }
        Ok(emit(input.valuation, &self.output, raw))
    }

    fn dir_delta(&self, _changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        all_outputs(&self.ports())
    }

    fn batch(&self, val: &Valuation) -> Result<BTreeMap<SlotId, Content>, OpError> {
        let g = val.model(&self.input);
        let tuples = g.edges_of_type(&self.ty).filter_map(|e| self.tuple(e));
        Ok(BTreeMap::from([(
            self.output.clone(),
            Content::Assignment(set_of(&self.vars, tuples)),
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
