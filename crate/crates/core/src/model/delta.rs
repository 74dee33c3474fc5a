use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::assignment::{AssignmentSet, Tuple};
use super::error::ModelError;
use super::graph::{Edge, ExternalRef, TypedGraph, Vertex};
use super::types::TypeGraph;

/// One atomic creation or deletion.
///
/// Removals carry the full element so consumers can react without
/// looking the element up in the (already updated) content.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "op", content = "element")]
pub enum Delta {
    AddVertex(Vertex),
    RemoveVertex(Vertex),
    AddEdge(Edge),
    RemoveEdge(Edge),
    AddTuple(Tuple),
    RemoveTuple(Tuple),
}

/// Ordered sequence of atomic deltas.
pub type DeltaSeq = Vec<Delta>;

impl Delta {
    pub fn inverse(&self) -> Delta {
        match self {
            Delta::AddVertex(v) => Delta::RemoveVertex(v.clone()),
            Delta::RemoveVertex(v) => Delta::AddVertex(v.clone()),
            Delta::AddEdge(e) => Delta::RemoveEdge(e.clone()),
            Delta::RemoveEdge(e) => Delta::AddEdge(e.clone()),
            Delta::AddTuple(t) => Delta::RemoveTuple(t.clone()),
            Delta::RemoveTuple(t) => Delta::AddTuple(t.clone()),
        }
    }

    pub fn is_model(&self) -> bool {
        !matches!(self, Delta::AddTuple(_) | Delta::RemoveTuple(_))
    }

    pub fn is_addition(&self) -> bool {
        matches!(
            self,
            Delta::AddVertex(_) | Delta::AddEdge(_) | Delta::AddTuple(_)
        )
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delta::AddVertex(v) => {
                write!(f, "+v {} {}", v.id, v.ty)?;
                if let Some(p) = &v.payload {
                    write!(f, " {}", p.to_literal())?;
                }
                Ok(())
            }
            Delta::RemoveVertex(v) => write!(f, "-v {}", v.id),
            Delta::AddEdge(e) => write!(f, "+e {} {} {} {}", e.id, e.ty, e.src, e.tgt),
            Delta::RemoveEdge(e) => write!(f, "-e {}", e.id),
            Delta::AddTuple(t) => write!(f, "+t {}", t.to_literal()),
            Delta::RemoveTuple(t) => write!(f, "-t {}", t.to_literal()),
        }
    }
}

/// Content of a slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Content {
    Model(TypedGraph),
    Assignment(AssignmentSet),
}

impl Content {
    pub fn as_model(&self) -> Option<&TypedGraph> {
        match self {
            Content::Model(g) => Some(g),
            Content::Assignment(_) => None,
        }
    }

    pub fn as_assignment(&self) -> Option<&AssignmentSet> {
        match self {
            Content::Assignment(a) => Some(a),
            Content::Model(_) => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Content::Model(g) => g.is_empty(),
            Content::Assignment(a) => a.is_empty(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Content::Model(g) => g.len(),
            Content::Assignment(a) => a.len(),
        }
    }

    /// Same kind, id and schema, no elements.
    pub fn empty_like(&self) -> Content {
        match self {
            Content::Model(g) => {
                let mut e = TypedGraph::new(g.id());
                e.set_linking(g.is_linking());
                Content::Model(e)
            }
            Content::Assignment(a) => Content::Assignment(AssignmentSet::new(a.variables().to_vec())),
        }
    }

    /// Applies `deltas` in order; on error the content is left untouched.
    pub fn apply(&mut self, deltas: &[Delta]) -> Result<(), ModelError> {
        self.apply_checked(deltas, None)
    }

    /// Like [`Content::apply`], additionally type-checking model additions.
    pub fn apply_checked(
        &mut self,
        deltas: &[Delta],
        tg: Option<&TypeGraph>,
    ) -> Result<(), ModelError> {
        for (done, d) in deltas.iter().enumerate() {
            if let Err(err) = self.apply_one(d, tg) {
                for applied in deltas[..done].iter().rev() {
                    self.apply_one(&applied.inverse(), None)
                        .expect("inverse of an applied delta is valid");
                }
                return Err(err);
            }
        }
        Ok(())
    }

    /// Value-semantics variant of [`Content::apply`].
    pub fn applied(&self, deltas: &[Delta]) -> Result<Content, ModelError> {
        let mut next = self.clone();
        next.apply(deltas)?;
        Ok(next)
    }

    fn apply_one(&mut self, d: &Delta, tg: Option<&TypeGraph>) -> Result<(), ModelError> {
        match (self, d) {
            (Content::Model(g), Delta::AddVertex(v)) => {
                if let Some(tg) = tg {
                    tg.check_vertex(v)?;
                }
                g.insert_vertex(v.clone())
            }
            (Content::Model(g), Delta::RemoveVertex(v)) => g.remove_vertex(v),
            (Content::Model(g), Delta::AddEdge(e)) => {
                if let Some(tg) = tg {
                    if g.edge(&e.id).is_none() {
                        tg.check_edge(e, g)?;
                    }
                }
                g.insert_edge(e.clone())
            }
            (Content::Model(g), Delta::RemoveEdge(e)) => g.remove_edge(e),
            (Content::Assignment(a), Delta::AddTuple(t)) => a.insert(t.clone()),
            (Content::Assignment(a), Delta::RemoveTuple(t)) => a.remove(t),
            (Content::Model(_), _) => Err(ModelError::KindMismatch("tuple")),
            (Content::Assignment(_), _) => Err(ModelError::KindMismatch("model")),
        }
    }

    /// Creation sequence that rebuilds this content from empty; vertices precede edges.
    pub fn seed_deltas(&self) -> DeltaSeq {
        match self {
            Content::Model(g) => g
                .vertices()
                .cloned()
                .map(Delta::AddVertex)
                .chain(g.edges().cloned().map(Delta::AddEdge))
                .collect(),
            Content::Assignment(a) => a.tuples().cloned().map(Delta::AddTuple).collect(),
        }
    }

    /// Normalized sequence turning `self` into `after`.
    pub fn diff(&self, after: &Content) -> Result<DeltaSeq, ModelError> {
        match (self, after) {
            (Content::Model(a), Content::Model(b)) => Ok(diff_graphs(a, b)),
            (Content::Assignment(a), Content::Assignment(b)) => {
                if a.variables() != b.variables() {
                    return Err(ModelError::SchemaMismatch);
                }
                let mut out: DeltaSeq = a
                    .tuples()
                    .filter(|t| !b.contains(t))
                    .cloned()
                    .map(Delta::RemoveTuple)
                    .collect();
                out.extend(
                    b.tuples()
                        .filter(|t| !a.contains(t))
                        .cloned()
                        .map(Delta::AddTuple),
                );
                Ok(out)
            }
            _ => Err(ModelError::KindMismatch("diff")),
        }
    }
}

/// Functional form of [`Content::applied`].
pub fn apply_delta(content: &Content, deltas: &[Delta]) -> Result<Content, ModelError> {
    content.applied(deltas)
}

pub fn seed_deltas(content: &Content) -> DeltaSeq {
    content.seed_deltas()
}

pub fn diff(before: &Content, after: &Content) -> Result<DeltaSeq, ModelError> {
    before.diff(after)
}

fn diff_graphs(a: &TypedGraph, b: &TypedGraph) -> DeltaSeq {
    // A vertex replaced in place drags its incident edges along.
    let replaced: std::collections::BTreeSet<&str> = a
        .vertices()
        .filter(|v| b.vertex(&v.id).is_some_and(|w| w != *v))
        .map(|v| v.id.as_str())
        .collect();
    let touches = |e: &Edge| {
        [&e.src, &e.tgt]
            .iter()
            .any(|end| end.as_local().is_some_and(|id| replaced.contains(id)))
    };
    let mut out = DeltaSeq::new();
    for e in a.edges() {
        if b.edge(&e.id) != Some(e) || touches(e) {
            out.push(Delta::RemoveEdge(e.clone()));
        }
    }
    for v in a.vertices() {
        if b.vertex(&v.id) != Some(v) {
            out.push(Delta::RemoveVertex(v.clone()));
        }
    }
    for v in b.vertices() {
        if a.vertex(&v.id) != Some(v) {
            out.push(Delta::AddVertex(v.clone()));
        }
    }
    for e in b.edges() {
        if a.edge(&e.id) != Some(e) || touches(e) {
            out.push(Delta::AddEdge(e.clone()));
        }
    }
    out
}

/// Desired end state for a set of element ids of one graph; `None` means absent.
#[derive(Debug, Default, Clone)]
pub struct GraphPatch {
    pub vertices: BTreeMap<String, Option<Vertex>>,
    pub edges: BTreeMap<String, Option<Edge>>,
}

impl GraphPatch {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() && self.edges.is_empty()
    }

    pub fn set_vertex(&mut self, id: &str, v: Option<Vertex>) {
        self.vertices.insert(id.to_string(), v);
    }

    pub fn set_edge(&mut self, id: &str, e: Option<Edge>) {
        self.edges.insert(id.to_string(), e);
    }

    /// The state `id` will have once the patch is applied to `graph`.
    pub fn vertex<'a>(&'a self, graph: &'a TypedGraph, id: &str) -> Option<&'a Vertex> {
        match self.vertices.get(id) {
            Some(desired) => desired.as_ref(),
            None => graph.vertex(id),
        }
    }

    pub fn edge<'a>(&'a self, graph: &'a TypedGraph, id: &str) -> Option<&'a Edge> {
        match self.edges.get(id) {
            Some(desired) => desired.as_ref(),
            None => graph.edge(id),
        }
    }

    /// Minimal ordered deltas taking `graph` to the patched state:
    /// edge removals, vertex removals, vertex additions, edge additions.
    pub fn to_deltas(&self, graph: &TypedGraph) -> DeltaSeq {
        let changed_vertices: Vec<(Option<&Vertex>, Option<&Vertex>)> = self
            .vertices
            .iter()
            .map(|(id, want)| (graph.vertex(id), want.as_ref()))
            .filter(|(have, want)| have != want)
            .collect();
        // Edges incident to a vertex replaced in place are re-created; edges
        // incident to a removed vertex go with it.
        let mut forced: BTreeMap<&str, &Edge> = BTreeMap::new();
        let mut dropped: BTreeMap<&str, &Edge> = BTreeMap::new();
        for (have, want) in &changed_vertices {
            if let Some(v) = have {
                let end = super::graph::Endpoint::local(v.id.clone());
                let target = if want.is_some() { &mut forced } else { &mut dropped };
                for e in graph.out_edges(&end).chain(graph.in_edges(&end)) {
                    target.insert(e.id.as_str(), e);
                }
            }
        }
        let mut changed_edges: Vec<(Option<&Edge>, Option<&Edge>)> = self
            .edges
            .iter()
            .filter(|(id, want)| graph.edge(id) != want.as_ref() || forced.contains_key(id.as_str()))
            .map(|(id, want)| (graph.edge(id), want.as_ref()))
            .collect();
        for (id, e) in &forced {
            if !self.edges.contains_key(*id) && !dropped.contains_key(id) {
                changed_edges.push((Some(*e), Some(*e)));
            }
        }
        for (id, e) in &dropped {
            if !self.edges.contains_key(*id) {
                changed_edges.push((Some(*e), None));
            }
        }
        let mut out = DeltaSeq::new();
        out.extend(
            changed_edges
                .iter()
                .filter_map(|(have, _)| have.map(|e| Delta::RemoveEdge(e.clone()))),
        );
        out.extend(
            changed_vertices
                .iter()
                .filter_map(|(have, _)| have.map(|v| Delta::RemoveVertex(v.clone()))),
        );
        out.extend(
            changed_vertices
                .iter()
                .filter_map(|(_, want)| want.map(|v| Delta::AddVertex(v.clone()))),
        );
        out.extend(
            changed_edges
                .iter()
                .filter_map(|(_, want)| want.map(|e| Delta::AddEdge(e.clone()))),
        );
        out
    }
}

/// Collapses a valid sequence into its net effect on `content`, so that no
/// element is both added and removed.
///
/// Tuple deltas keep first-occurrence order; model deltas follow
/// [`GraphPatch::to_deltas`] ordering.
pub fn normalize(content: &Content, deltas: &[Delta]) -> DeltaSeq {
    match content {
        Content::Assignment(a) => normalize_tuples(a, deltas),
        Content::Model(g) => normalize_model(g, deltas),
    }
}

pub fn normalize_tuples(set: &AssignmentSet, deltas: &[Delta]) -> DeltaSeq {
    let mut order: Vec<&Tuple> = Vec::new();
    let mut present: HashMap<&Tuple, bool> = HashMap::new();
    for d in deltas {
        let (t, now) = match d {
            Delta::AddTuple(t) => (t, true),
            Delta::RemoveTuple(t) => (t, false),
            _ => continue,
        };
        if !present.contains_key(t) {
            order.push(t);
        }
        present.insert(t, now);
    }
    order
        .into_iter()
        .filter_map(|t| {
            let now = present[t];
            match (set.contains(t), now) {
                (false, true) => Some(Delta::AddTuple(t.clone())),
                (true, false) => Some(Delta::RemoveTuple(t.clone())),
                _ => None,
            }
        })
        .collect()
}

fn normalize_model(graph: &TypedGraph, deltas: &[Delta]) -> DeltaSeq {
    let mut patch = GraphPatch::default();
    for d in deltas {
        match d {
            Delta::AddVertex(v) => patch.set_vertex(&v.id, Some(v.clone())),
            Delta::RemoveVertex(v) => patch.set_vertex(&v.id, None),
            Delta::AddEdge(e) => patch.set_edge(&e.id, Some(e.clone())),
            Delta::RemoveEdge(e) => patch.set_edge(&e.id, None),
            _ => {}
        }
    }
    patch.to_deltas(graph)
}

/// Lookup of models by graph id, used to resolve linking-model references.
pub trait GraphLookup {
    fn graph_by_id(&self, id: &str) -> Option<&TypedGraph>;
}

impl GraphLookup for BTreeMap<String, TypedGraph> {
    fn graph_by_id(&self, id: &str) -> Option<&TypedGraph> {
        self.get(id)
    }
}

impl GraphLookup for [&TypedGraph] {
    fn graph_by_id(&self, id: &str) -> Option<&TypedGraph> {
        self.iter().copied().find(|g| g.id() == id)
    }
}

/// Resolves a reference into another model.
pub fn resolve_external<'a, L: GraphLookup + ?Sized>(
    r: &ExternalRef,
    ctx: &'a L,
) -> Result<&'a Vertex, ModelError> {
    ctx.graph_by_id(&r.graph)
        .and_then(|g| g.vertex(&r.vertex))
        .ok_or_else(|| ModelError::NotFound(r.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Value, ValueKind, Variable};

    fn g(vs: &[(&str, &str)], es: &[(&str, &str, &str, &str)]) -> Content {
        let mut graph = TypedGraph::new("g");
        for (id, ty) in vs {
            graph = graph.with_vertex(Vertex::new(*id, *ty));
        }
        for (id, ty, s, t) in es {
            graph = graph.with_edge(Edge::new(*id, *ty, *s, *t));
        }
        Content::Model(graph)
    }

    #[test]
    fn add_to_empty() {
        let out = apply_delta(&g(&[], &[]), &[Delta::AddVertex(Vertex::new("v1", "Class"))]).unwrap();
        assert_eq!(out, g(&[("v1", "Class")], &[]));
    }

    #[test]
    fn cancellation() {
        let v2 = Vertex::new("v2", "Class");
        let out = apply_delta(
            &g(&[("v1", "Class")], &[]),
            &[Delta::AddVertex(v2.clone()), Delta::RemoveVertex(v2)],
        )
        .unwrap();
        assert_eq!(out, g(&[("v1", "Class")], &[]));
    }

    #[test]
    fn vertex_removal_requires_isolated_vertex() {
        let before = g(
            &[("p1", "Package"), ("t1", "Type")],
            &[("e1", "contains", "p1", "t1")],
        );
        let err = apply_delta(&before, &[Delta::RemoveVertex(Vertex::new("p1", "Package"))]);
        assert!(matches!(err, Err(ModelError::AdjacentEdges { .. })));
    }

    #[test]
    fn strict_errors() {
        let base = g(&[("v1", "Class")], &[]);
        let dup = apply_delta(&base, &[Delta::AddVertex(Vertex::new("v1", "Class"))]);
        assert!(matches!(dup, Err(ModelError::DuplicateVertex(_))));
        let gone = apply_delta(&base, &[Delta::RemoveVertex(Vertex::new("v9", "Class"))]);
        assert!(matches!(gone, Err(ModelError::MissingVertex(_))));
        let dangling = apply_delta(&base, &[Delta::AddEdge(Edge::new("e", "r", "v1", "v2"))]);
        assert!(matches!(dangling, Err(ModelError::MissingEndpoint { .. })));
        let wrong_type = apply_delta(&base, &[Delta::RemoveVertex(Vertex::new("v1", "Other"))]);
        assert!(matches!(wrong_type, Err(ModelError::ElementMismatch(_))));

        let vars = vec![Variable::new("x", ValueKind::Int)];
        let a = Content::Assignment(AssignmentSet::new(vars));
        let t = Tuple(vec![Value::Int(1)]);
        assert!(a.applied(&[Delta::RemoveTuple(t.clone())]).is_err());
        let once = a.applied(&[Delta::AddTuple(t.clone())]).unwrap();
        assert!(once.applied(&[Delta::AddTuple(t)]).is_err());
    }

    #[test]
    fn failed_apply_is_atomic() {
        let mut c = g(&[("v1", "Class")], &[]);
        let before = c.clone();
        let err = c.apply(&[
            Delta::AddVertex(Vertex::new("v2", "Class")),
            Delta::AddEdge(Edge::new("e", "r", "v1", "v2")),
            Delta::AddVertex(Vertex::new("v1", "Class")),
        ]);
        assert!(err.is_err());
        assert_eq!(c, before);
        assert_eq!(c.as_model().unwrap().degree("v1"), 0);
    }

    #[test]
    fn seed_orders_vertices_first() {
        let c = g(
            &[("p1", "Package"), ("t1", "Type")],
            &[("e1", "contains", "p1", "t1")],
        );
        let seed = seed_deltas(&c);
        assert_eq!(
            seed.iter().map(ToString::to_string).collect::<Vec<_>>(),
            vec!["+v p1 Package", "+v t1 Type", "+e e1 contains p1 t1"]
        );
        assert_eq!(apply_delta(&c.empty_like(), &seed).unwrap(), c);
        assert!(seed_deltas(&g(&[], &[])).is_empty());
    }

    #[test]
    fn diff_examples() {
        let a = g(&[("v1", "C"), ("v2", "C")], &[("e", "r", "v1", "v2")]);
        let b = g(&[("v1", "C")], &[]);
        assert!(diff(&a, &a).unwrap().is_empty());
        let d = diff(&a, &b).unwrap();
        assert_eq!(
            d.iter().map(ToString::to_string).collect::<Vec<_>>(),
            vec!["-e e", "-v v2"]
        );
        assert_eq!(apply_delta(&a, &d).unwrap(), b);
        assert_eq!(
            diff(&g(&[], &[]), &b).unwrap(),
            vec![Delta::AddVertex(Vertex::new("v1", "C"))]
        );
        let set = Content::Assignment(AssignmentSet::new(vec![]));
        assert!(matches!(diff(&a, &set), Err(ModelError::KindMismatch(_))));
    }

    #[test]
    fn normalize_cancels_pairs() {
        let base = g(&[("v1", "C")], &[]);
        let v2 = Vertex::new("v2", "C");
        let e = Edge::new("e", "r", "v1", "v2");
        let seq = vec![
            Delta::AddVertex(v2.clone()),
            Delta::AddEdge(e.clone()),
            Delta::RemoveEdge(e),
            Delta::RemoveVertex(v2),
        ];
        assert!(normalize(&base, &seq).is_empty());

        let vars = vec![Variable::new("x", ValueKind::Int)];
        let set = Content::Assignment(
            AssignmentSet::with_tuples(vars, [Tuple(vec![Value::Int(1)])]).unwrap(),
        );
        let one = Tuple(vec![Value::Int(1)]);
        let two = Tuple(vec![Value::Int(2)]);
        let seq = vec![
            Delta::RemoveTuple(one.clone()),
            Delta::AddTuple(two.clone()),
            Delta::AddTuple(one),
            Delta::RemoveTuple(two.clone()),
            Delta::AddTuple(two.clone()),
        ];
        assert_eq!(normalize(&set, &seq), vec![Delta::AddTuple(two)]);
    }

    #[test]
    fn resolve_external_refs() {
        let mut ctx = BTreeMap::new();
        ctx.insert(
            "g1".to_string(),
            TypedGraph::new("g1").with_vertex(Vertex::new("v1", "C")),
        );
        assert_eq!(
            resolve_external(&ExternalRef::new("g1", "v1"), &ctx).unwrap().id,
            "v1"
        );
        assert!(matches!(
            resolve_external(&ExternalRef::new("g1", "vX"), &ctx),
            Err(ModelError::NotFound(_))
        ));
        assert!(resolve_external(&ExternalRef::new("g2", "v1"), &ctx).is_err());
    }

    #[test]
    fn replacing_a_vertex_recreates_incident_edges() {
        use crate::model::Value;
        let before = Content::Model(
            TypedGraph::new("g")
                .with_vertex(Vertex::new("a", "N").with_payload(Value::Int(1)))
                .with_vertex(Vertex::new("b", "N").with_payload(Value::Int(2)))
                .with_edge(Edge::new("e", "r", "a", "b")),
        );
        let after = Content::Model(
            TypedGraph::new("g")
                .with_vertex(Vertex::new("a", "N").with_payload(Value::Int(5)))
                .with_vertex(Vertex::new("b", "N").with_payload(Value::Int(2)))
                .with_edge(Edge::new("e", "r", "a", "b")),
        );
        let d = diff(&before, &after).unwrap();
        assert_eq!(before.applied(&d).unwrap(), after);
        let mut patch = GraphPatch::default();
        patch.set_vertex("a", after.as_model().unwrap().vertex("a").cloned());
        let d = patch.to_deltas(before.as_model().unwrap());
        assert_eq!(before.applied(&d).unwrap(), after);
    }
}
