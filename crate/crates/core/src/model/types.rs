use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::error::ModelError;
use super::graph::{Edge, Endpoint, TypedGraph, Vertex};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeType {
    pub name: String,
    pub src: String,
    pub tgt: String,
}

/// Metamodel of a modeling language.
///
/// Edge-type endpoints written `Other::Type` name vertex types of another
/// type graph; they are only usable from linking models.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TypeGraph {
    #[serde(default)]
    pub vertex_types: BTreeSet<String>,
    #[serde(default)]
    pub edge_types: Vec<EdgeType>,
    /// Vertex types whose instances carry a primitive payload.
    #[serde(default)]
    pub value_types: BTreeSet<String>,
}

impl TypeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex_type(mut self, name: &str) -> Self {
        self.vertex_types.insert(name.to_string());
        self
    }

    pub fn value_type(mut self, name: &str) -> Self {
        self.vertex_types.insert(name.to_string());
        self.value_types.insert(name.to_string());
        self
    }

    pub fn edge_type(mut self, name: &str, src: &str, tgt: &str) -> Self {
        self.edge_types.push(EdgeType {
            name: name.to_string(),
            src: src.to_string(),
            tgt: tgt.to_string(),
        });
        self
    }

    pub fn find_edge_type(&self, name: &str) -> Option<&EdgeType> {
        self.edge_types.iter().find(|e| e.name == name)
    }

    /// Structural well-formedness of the type graph itself.
    pub fn validate(&self) -> Result<(), String> {
        let mut names = BTreeSet::new();
        for et in &self.edge_types {
            if !names.insert(et.name.as_str()) {
                return Err(format!("duplicate edge type `{}`", et.name));
            }
            for end in [&et.src, &et.tgt] {
                if !end.contains("::") && !self.vertex_types.contains(end) {
                    return Err(format!(
                        "edge type `{}` references undeclared vertex type `{end}`",
                        et.name
                    ));
                }
            }
        }
        if let Some(v) = self.value_types.iter().find(|v| !self.vertex_types.contains(*v)) {
            return Err(format!("value type `{v}` is not a declared vertex type"));
        }
        Ok(())
    }

    pub fn check_vertex(&self, v: &Vertex) -> Result<(), ModelError> {
        if !self.vertex_types.contains(&v.ty) {
            return Err(ModelError::Typing(format!(
                "vertex `{}` has undeclared type `{}`",
                v.id, v.ty
            )));
        }
        let is_value = self.value_types.contains(&v.ty);
        match (&v.payload, is_value) {
            (Some(_), false) => Err(ModelError::Typing(format!(
                "vertex `{}` of non-value type `{}` carries a payload",
                v.id, v.ty
            ))),
            (None, true) => Err(ModelError::Typing(format!(
                "value vertex `{}` lacks a payload",
                v.id
            ))),
            _ => Ok(()),
        }
    }

    /// Checks an edge against the type graph; local endpoints are looked up in `graph`.
    pub fn check_edge(&self, e: &Edge, graph: &TypedGraph) -> Result<(), ModelError> {
        let Some(et) = self.find_edge_type(&e.ty) else {
            return Err(ModelError::Typing(format!(
                "edge `{}` has undeclared type `{}`",
                e.id, e.ty
            )));
        };
        for (end, expected) in [(&e.src, &et.src), (&e.tgt, &et.tgt)] {
            if let Endpoint::Local(id) = end {
                let actual = graph.vertex(id).map(|v| v.ty.as_str());
                if actual != Some(expected.as_str()) {
                    return Err(ModelError::Typing(format!(
                        "edge `{}` of type `{}` expects `{expected}` at `{id}`, found {}",
                        e.id,
                        e.ty,
                        actual.unwrap_or("nothing")
                    )));
                }
            } else if !expected.contains("::") && !graph.is_linking() {
                return Err(ModelError::Typing(format!(
                    "edge `{}` leaves the model",
                    e.id
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of [`check_typing`]: `ok` plus every violation found.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TypingReport {
    pub violations: Vec<String>,
}

impl TypingReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verifies that the flat typing of `graph` is a morphism into `tg`.
///
/// External endpoints are not resolved here; their types belong to
/// another model's type graph.
pub fn check_typing(graph: &TypedGraph, tg: &TypeGraph) -> TypingReport {
    let mut violations = Vec::new();
    for v in graph.vertices() {
        if let Err(e) = tg.check_vertex(v) {
            violations.push(e.to_string());
        }
    }
    for e in graph.edges() {
        if let Err(err) = tg.check_edge(e, graph) {
            violations.push(err.to_string());
        }
    }
    TypingReport { violations }
}

/// Per-name lookup of type graphs bound to model slots.
pub type TypeGraphs = BTreeMap<String, TypeGraph>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Value;

    fn tg() -> TypeGraph {
        TypeGraph::new()
            .vertex_type("Package")
            .vertex_type("Class")
            .value_type("Name")
            .edge_type("contains", "Package", "Class")
    }

    #[test]
    fn empty_graph_is_typed() {
        assert!(check_typing(&TypedGraph::new("g"), &TypeGraph::new()).ok());
    }

    #[test]
    fn undeclared_vertex_type() {
        let g = TypedGraph::new("g").with_vertex(Vertex::new("v1", "Class"));
        assert!(!check_typing(&g, &TypeGraph::new()).ok());
    }

    #[test]
    fn containment_edge() {
        let g = TypedGraph::new("g")
            .with_vertex(Vertex::new("p1", "Package"))
            .with_vertex(Vertex::new("c1", "Class"))
            .with_edge(Edge::new("e", "contains", "p1", "c1"));
        assert!(check_typing(&g, &tg()).ok());
        let flipped = TypedGraph::new("g")
            .with_vertex(Vertex::new("p1", "Package"))
            .with_vertex(Vertex::new("c1", "Class"))
            .with_edge(Edge::new("e", "contains", "c1", "p1"));
        assert_eq!(check_typing(&flipped, &tg()).violations.len(), 1);
    }

    #[test]
    fn payload_only_on_value_types() {
        let g = TypedGraph::new("g")
            .with_vertex(Vertex::new("n", "Name").with_payload(Value::String("x".into())))
            .with_vertex(Vertex::new("c", "Class").with_payload(Value::Int(1)))
            .with_vertex(Vertex::new("m", "Name"));
        assert_eq!(check_typing(&g, &tg()).violations.len(), 2);
    }

    #[test]
    fn type_graph_validation() {
        assert!(tg().validate().is_ok());
        assert!(TypeGraph::new().edge_type("x", "A", "B").validate().is_err());
        assert!(TypeGraph::new()
            .vertex_type("A")
            .edge_type("x", "A", "Other::B")
            .validate()
            .is_ok());
    }
}
