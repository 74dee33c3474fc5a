use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::error::ModelError;
use super::value::Value;

/// A vertex reference that lives in another model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExternalRef {
    pub graph: String,
    pub vertex: String,
}

impl ExternalRef {
    pub fn new(graph: impl Into<String>, vertex: impl Into<String>) -> Self {
        ExternalRef {
            graph: graph.into(),
            vertex: vertex.into(),
        }
    }
}

impl fmt::Display for ExternalRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}::{}", self.graph, self.vertex)
    }
}

/// Edge endpoint: a local vertex or, in linking models, a vertex of another model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Local(String),
    External(ExternalRef),
}

impl Endpoint {
    pub fn local(id: impl Into<String>) -> Self {
        Endpoint::Local(id.into())
    }

    pub fn external(graph: impl Into<String>, vertex: impl Into<String>) -> Self {
        Endpoint::External(ExternalRef::new(graph, vertex))
    }

    pub fn as_local(&self) -> Option<&str> {
        match self {
            Endpoint::Local(id) => Some(id),
            Endpoint::External(_) => None,
        }
    }

    /// Parses the `graphId::vertexId` text form; anything else is local.
    pub fn parse(text: &str) -> Endpoint {
        match text.split_once("::") {
            Some((g, v)) if !g.is_empty() && !v.is_empty() => Endpoint::external(g, v),
            _ => Endpoint::local(text),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Local(id) => f.write_str(id),
            Endpoint::External(r) => r.fmt(f),
        }
    }
}

impl Serialize for Endpoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Ok(Endpoint::parse(&text))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    pub id: String,
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "super::value::scalar")]
    pub payload: Option<Value>,
}

impl Vertex {
    pub fn new(id: impl Into<String>, ty: impl Into<String>) -> Self {
        Vertex {
            id: id.into(),
            ty: ty.into(),
            payload: None,
        }
    }

    pub fn with_payload(mut self, payload: Value) -> Self {
        self.payload = Some(payload);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub id: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub src: Endpoint,
    pub tgt: Endpoint,
}

impl Edge {
    pub fn new(
        id: impl Into<String>,
        ty: impl Into<String>,
        src: impl Into<String>,
        tgt: impl Into<String>,
    ) -> Self {
        Edge {
            id: id.into(),
            ty: ty.into(),
            src: Endpoint::parse(&src.into()),
            tgt: Endpoint::parse(&tgt.into()),
        }
    }
}

/// A typed attributed graph: the content of a model slot.
///
/// Equality compares vertices and edges by id; the graph id and the
/// derived indices are metadata.
#[derive(Debug, Clone, Default)]
pub struct TypedGraph {
    id: String,
    linking: bool,
    vertices: BTreeMap<String, Vertex>,
    edges: BTreeMap<String, Edge>,
    out_adj: HashMap<Endpoint, BTreeSet<String>>,
    in_adj: HashMap<Endpoint, BTreeSet<String>>,
    vertex_types: HashMap<String, BTreeSet<String>>,
    edge_types: HashMap<String, BTreeSet<String>>,
}

impl PartialEq for TypedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.edges == other.edges
    }
}

impl Eq for TypedGraph {}

impl TypedGraph {
    pub fn new(id: impl Into<String>) -> Self {
        TypedGraph {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn linking(id: impl Into<String>) -> Self {
        TypedGraph {
            id: id.into(),
            linking: true,
            ..Default::default()
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn set_id(&mut self, id: impl Into<String>) {
        self.id = id.into();
    }

    pub fn is_linking(&self) -> bool {
        self.linking
    }

    pub fn set_linking(&mut self, linking: bool) {
        self.linking = linking;
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() && self.edges.is_empty()
    }

    pub fn len(&self) -> usize {
        self.vertices.len() + self.edges.len()
    }

    pub fn vertex(&self, id: &str) -> Option<&Vertex> {
        self.vertices.get(id)
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.edges.get(id)
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Ids of vertices with the given type, in id order.
    pub fn vertices_of_type<'a>(&'a self, ty: &str) -> impl Iterator<Item = &'a Vertex> + 'a {
        self.vertex_types
            .get(ty)
            .into_iter()
            .flatten()
            .map(move |id| &self.vertices[id])
    }

    pub fn edges_of_type<'a>(&'a self, ty: &str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edge_types
            .get(ty)
            .into_iter()
            .flatten()
            .map(move |id| &self.edges[id])
    }

    /// Edges leaving `endpoint`, in id order.
    pub fn out_edges<'a>(&'a self, endpoint: &Endpoint) -> impl Iterator<Item = &'a Edge> + 'a {
        self.out_adj
            .get(endpoint)
            .into_iter()
            .flatten()
            .map(move |id| &self.edges[id])
    }

    /// Edges entering `endpoint`, in id order.
    pub fn in_edges<'a>(&'a self, endpoint: &Endpoint) -> impl Iterator<Item = &'a Edge> + 'a {
        self.in_adj
            .get(endpoint)
            .into_iter()
            .flatten()
            .map(move |id| &self.edges[id])
    }

    pub fn out_degree(&self, endpoint: &Endpoint) -> usize {
        self.out_adj.get(endpoint).map_or(0, BTreeSet::len)
    }

    pub fn in_degree(&self, endpoint: &Endpoint) -> usize {
        self.in_adj.get(endpoint).map_or(0, BTreeSet::len)
    }

    /// Whether some `ty` edge runs from `src` to `tgt`; scans the smaller side.
    pub fn connected(&self, src: &Endpoint, ty: &str, tgt: &Endpoint) -> bool {
        if self.out_degree(src) <= self.in_degree(tgt) {
            self.out_edges(src).any(|e| e.ty == ty && &e.tgt == tgt)
        } else {
            self.in_edges(tgt).any(|e| e.ty == ty && &e.src == src)
        }
    }

    pub fn degree(&self, vertex: &str) -> usize {
        let ep = Endpoint::local(vertex);
        self.out_adj.get(&ep).map_or(0, BTreeSet::len) + self.in_adj.get(&ep).map_or(0, BTreeSet::len)
    }

    pub(crate) fn insert_vertex(&mut self, v: Vertex) -> Result<(), ModelError> {
        if self.vertices.contains_key(&v.id) {
            return Err(ModelError::DuplicateVertex(v.id));
        }
        if v.payload.as_ref().is_some_and(|p| !p.kind().is_primitive()) {
            return Err(ModelError::PayloadNotPrimitive(v.id));
        }
        self.vertex_types
            .entry(v.ty.clone())
            .or_default()
            .insert(v.id.clone());
        self.vertices.insert(v.id.clone(), v);
        Ok(())
    }

    pub(crate) fn remove_vertex(&mut self, v: &Vertex) -> Result<(), ModelError> {
        match self.vertices.get(&v.id) {
            None => return Err(ModelError::MissingVertex(v.id.clone())),
            Some(stored) if stored != v => return Err(ModelError::ElementMismatch(v.id.clone())),
            Some(_) => {}
        }
        let count = self.degree(&v.id);
        if count > 0 {
            return Err(ModelError::AdjacentEdges {
                vertex: v.id.clone(),
                count,
            });
        }
        self.vertices.remove(&v.id);
        remove_index(&mut self.vertex_types, &v.ty, &v.id);
        let ep = Endpoint::local(v.id.clone());
        self.out_adj.remove(&ep);
        self.in_adj.remove(&ep);
        Ok(())
    }

    fn check_endpoint(&self, edge: &str, ep: &Endpoint) -> Result<(), ModelError> {
        match ep {
            Endpoint::Local(id) if !self.vertices.contains_key(id) => {
                Err(ModelError::MissingEndpoint {
                    edge: edge.to_string(),
                    endpoint: id.clone(),
                })
            }
            Endpoint::External(_) if !self.linking => {
                Err(ModelError::ExternalInRegularGraph(edge.to_string()))
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn insert_edge(&mut self, e: Edge) -> Result<(), ModelError> {
        if self.edges.contains_key(&e.id) {
            return Err(ModelError::DuplicateEdge(e.id));
        }
        self.check_endpoint(&e.id, &e.src)?;
        self.check_endpoint(&e.id, &e.tgt)?;
        self.out_adj
            .entry(e.src.clone())
            .or_default()
            .insert(e.id.clone());
        self.in_adj
            .entry(e.tgt.clone())
            .or_default()
            .insert(e.id.clone());
        self.edge_types
            .entry(e.ty.clone())
            .or_default()
            .insert(e.id.clone());
        self.edges.insert(e.id.clone(), e);
        Ok(())
    }

    pub(crate) fn remove_edge(&mut self, e: &Edge) -> Result<(), ModelError> {
        match self.edges.get(&e.id) {
            None => return Err(ModelError::MissingEdge(e.id.clone())),
            Some(stored) if stored != e => return Err(ModelError::ElementMismatch(e.id.clone())),
            Some(_) => {}
        }
        self.edges.remove(&e.id);
        remove_index(&mut self.out_adj, &e.src, &e.id);
        remove_index(&mut self.in_adj, &e.tgt, &e.id);
        remove_index(&mut self.edge_types, &e.ty, &e.id);
        Ok(())
    }

    /// Builder-style helpers for fixtures; panic on invalid input.
    pub fn with_vertex(mut self, v: Vertex) -> Self {
        self.insert_vertex(v).expect("valid vertex");
        self
    }

    pub fn with_edge(mut self, e: Edge) -> Self {
        self.insert_edge(e).expect("valid edge");
        self
    }
}

fn remove_index<K, Q>(index: &mut HashMap<K, BTreeSet<String>>, key: &Q, id: &str)
where
    K: std::borrow::Borrow<Q> + std::hash::Hash + Eq,
    Q: std::hash::Hash + Eq + ?Sized,
{
    if let Some(set) = index.get_mut(key) {
        set.remove(id);
        if set.is_empty() {
            index.remove(key);
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct GraphFile {
    id: String,
    #[serde(default)]
    is_linking: bool,
    #[serde(default)]
    vertices: Vec<Vertex>,
    #[serde(default)]
    edges: Vec<Edge>,
}

impl Serialize for TypedGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GraphFile {
            id: self.id.clone(),
            is_linking: self.linking,
            vertices: self.vertices.values().cloned().collect(),
            edges: self.edges.values().cloned().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TypedGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let file = GraphFile::deserialize(d)?;
        let mut g = TypedGraph::new(file.id);
        g.linking = file.is_linking;
        for v in file.vertices {
            g.insert_vertex(v).map_err(serde::de::Error::custom)?;
        }
        for e in file.edges {
            g.insert_edge(e).map_err(serde::de::Error::custom)?;
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacency_tracks_edges() {
        let g = TypedGraph::new("g")
            .with_vertex(Vertex::new("p", "Package"))
            .with_vertex(Vertex::new("t", "Type"))
            .with_edge(Edge::new("e", "contains", "p", "t"));
        assert_eq!(g.degree("p"), 1);
        assert_eq!(g.out_edges(&Endpoint::local("p")).count(), 1);
        assert_eq!(g.in_edges(&Endpoint::local("t")).count(), 1);
        assert_eq!(g.vertices_of_type("Type").count(), 1);
    }

    #[test]
    fn external_endpoint_needs_linking() {
        let mut g = TypedGraph::new("g").with_vertex(Vertex::new("l", "Link"));
        let e = Edge::new("e", "to", "l", "other::v");
        assert!(matches!(
            g.insert_edge(e.clone()),
            Err(ModelError::ExternalInRegularGraph(_))
        ));
        g.set_linking(true);
        g.insert_edge(e).unwrap();
        assert_eq!(g.in_edges(&Endpoint::external("other", "v")).count(), 1);
    }

    #[test]
    fn json_shape() {
        let g = TypedGraph::linking("corr")
            .with_vertex(Vertex::new("l", "Link").with_payload(Value::Int(1)))
            .with_edge(Edge::new("e", "to", "l", "cd::c1"));
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(
            text,
            r#"{"id":"corr","isLinking":true,"vertices":[{"id":"l","type":"Link","payload":1}],"edges":[{"id":"e","type":"to","src":"l","tgt":"cd::c1"}]}"#
        );
        let back: TypedGraph = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
        assert!(back.is_linking());
    }
}
