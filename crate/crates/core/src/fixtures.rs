//! Bundled example networks and the synthetic class-diagram generator.

use serde_json::json;

use crate::io::NetworkSpec;
use crate::model::{Delta, DeltaSeq, Edge, TypedGraph, Value, Vertex};

fn spec(value: serde_json::Value) -> NetworkSpec {
    serde_json::from_value(value).expect("bundled fixtures are well-formed")
}

/// Query counting the methods of every type of one kind per package:
/// `{k}tm(t, m)`, `{k}tc(t, n)`, `{k}pt(p, t)`, `{k}ptc(p, t, n)`, `{k}pm(p, n)`.
fn method_count_query(k: &str, ty: &str, types_edge: &str, methods_edge: &str) -> (Vec<serde_json::Value>, Vec<serde_json::Value>) {
    let var = |name: &str, kind: &str| json!({"name": name, "kind": kind});
    let slot = |id: &str, vars: Vec<serde_json::Value>| {
        json!({"id": format!("{k}{id}"), "kind": "assignment", "vars": vars})
    };
    let slots = vec![
        slot("tm", vec![var("t", "vertex"), var("m", "vertex")]),
        slot("tc", vec![var("t", "vertex"), var("n", "int")]),
        slot("pt", vec![var("p", "vertex"), var("t", "vertex")]),
        slot("ptc", vec![var("p", "vertex"), var("t", "vertex"), var("n", "int")]),
        slot("pm", vec![var("p", "vertex"), var("n", "int")]),
    ];
    let s = |id: &str| format!("{k}{id}");
    let ops = vec![
        json!({"id": s("methods"), "type": "pattern",
               "params": {"pattern": format!("t:{ty} -{methods_edge}-> m:Method")},
               "inputs": ["asg"], "outputs": [s("tm")]}),
        json!({"id": s("count"), "type": "group_count", "params": {"by": ["t"]},
               "inputs": [s("tm")], "outputs": [s("tc")]}),
        json!({"id": s("types"), "type": "pattern",
               "params": {"pattern": format!("p:Package -{types_edge}-> t:{ty}")},
               "inputs": ["asg"], "outputs": [s("pt")]}),
        json!({"id": s("join"), "type": "join", "inputs": [s("pt"), s("tc")], "outputs": [s("ptc")]}),
        json!({"id": s("sum"), "type": "group_sum", "params": {"by": ["p"], "of": "n"},
               "inputs": [s("ptc")], "outputs": [s("pm")]}),
    ];
    (slots, ops)
}

/// Class diagram synchronized into a Java-like ASG, followed by queries
/// counting the methods of all types per package.
///
/// Every CD package yields an interface package `.api` and an
/// implementation package `.impl`; every class an interface in the first
/// and a class in the second; every attribute a field of the class plus a
/// getter and a setter in both the interface and the class.
///
/// Slots: `cd` (user), `asg`, `corr`, then `i*` for interfaces and `c*`
/// for classes, ending in the metrics slots `ipm` and `cpm`.
pub fn bench_spec() -> NetworkSpec {
    let target = |key: &str, ty: &str| json!({"key": key, "type": ty, "copyPayload": true});
    let edge = |key: &str, ty: &str, src: &str, tgt: &str| json!({"key": key, "type": ty, "src": src, "tgt": tgt});
    let rules = json!({"rules": [
        {"name": "pkg", "sourceType": "Package",
         "targets": [target("api", "Package"), target("impl", "Package")]},
        {"name": "cls", "sourceType": "Class",
         "parent": {"edgeType": "contains", "rule": "pkg"},
         "targets": [target("i", "Interface"), target("k", "Class")],
         "edges": [edge("in", "interfaces", "parent.api", "i"), edge("kn", "classes", "parent.impl", "k")]},
        {"name": "attr", "sourceType": "Attribute",
         "parent": {"edgeType": "attrs", "rule": "cls"},
         "targets": [target("f", "Field"), target("ig", "Method"), target("is", "Method"),
                     target("kg", "Method"), target("ks", "Method")],
         "edges": [edge("fld", "fields", "parent.k", "f"),
                   edge("igm", "signatures", "parent.i", "ig"), edge("ism", "signatures", "parent.i", "is"),
                   edge("kgm", "methods", "parent.k", "kg"), edge("ksm", "methods", "parent.k", "ks")]}
    ]});
    let mut slots = vec![
        json!({"id": "cd", "kind": "model", "typeGraph": "CD"}),
        json!({"id": "asg", "kind": "model", "typeGraph": "ASG"}),
        json!({"id": "corr", "kind": "model", "linking": true}),
    ];
    let mut ops = vec![json!({"id": "sync", "type": "sync_uni", "params": {"rules": rules},
                              "inputs": ["cd"], "outputs": ["asg", "corr"]})];
    for (k, ty, types_edge, methods_edge) in [
        ("i", "Interface", "interfaces", "signatures"),
        ("c", "Class", "classes", "methods"),
    ] {
        let (s, o) = method_count_query(k, ty, types_edge, methods_edge);
        slots.extend(s);
        ops.extend(o);
    }
    spec(json!({
        "typeGraphs": {
            "CD": {
                "vertexTypes": ["Package", "Class", "Attribute"],
                "valueTypes": ["Package", "Class", "Attribute"],
                "edgeTypes": [
                    {"name": "contains", "src": "Package", "tgt": "Class"},
                    {"name": "attrs", "src": "Class", "tgt": "Attribute"}
                ]
            },
            "ASG": {
                "vertexTypes": ["Package", "Interface", "Class", "Field", "Method"],
                "valueTypes": ["Package", "Interface", "Class", "Field", "Method"],
                "edgeTypes": [
                    {"name": "interfaces", "src": "Package", "tgt": "Interface"},
                    {"name": "classes", "src": "Package", "tgt": "Class"},
                    {"name": "fields", "src": "Class", "tgt": "Field"},
                    {"name": "signatures", "src": "Interface", "tgt": "Method"},
                    {"name": "methods", "src": "Class", "tgt": "Method"}
                ]
            }
        },
        "slots": slots,
        "ops": ops
    }))
}

fn class_id(p: usize, c: usize) -> String {
    format!("p{p}c{c}")
}

/// `packages × classes` classes, each with `attributes` attributes.
pub fn synthetic_cd(packages: usize, classes: usize, attributes: usize) -> TypedGraph {
    let mut g = TypedGraph::new("cd");
    for p in 0..packages {
        let pid = format!("p{p}");
        g = g.with_vertex(Vertex::new(&pid, "Package").with_payload(Value::String(format!("pkg{p}"))));
        for c in 0..classes {
            let cid = class_id(p, c);
            g = g
                .with_vertex(Vertex::new(&cid, "Class").with_payload(Value::String(format!("C{p}_{c}"))))
                .with_edge(Edge::new(format!("{cid}.in"), "contains", &pid, &cid));
            for a in 0..attributes {
                let (v, e) = attribute(&cid, &format!("a{a}"));
                g = g.with_vertex(v).with_edge(e);
            }
        }
    }
    g
}

fn attribute(class: &str, suffix: &str) -> (Vertex, Edge) {
    let aid = format!("{class}{suffix}");
    (
        Vertex::new(&aid, "Attribute").with_payload(Value::String(format!("f{suffix}"))),
        Edge::new(format!("{aid}.of"), "attrs", class, &aid),
    )
}

/// Adds one attribute to every class of `cd`; `round` keeps ids fresh.
pub fn attribute_update(cd: &TypedGraph, round: usize) -> DeltaSeq {
    let mut out = Vec::new();
    for class in cd.vertices_of_type("Class") {
        let (v, e) = attribute(&class.id, &format!("u{round}"));
        out.push(Delta::AddVertex(v));
        out.push(Delta::AddEdge(e));
    }
    out
}

fn int_slot(id: &str) -> serde_json::Value {
    json!({"id": id, "kind": "assignment", "vars": [{"name": "a", "kind": "int"}]})
}

/// `Y = L \ X` and `X = L ⋈ Y`: adding a value to `L` flips `X` and `Y`
/// forever. Starts empty and valid.
pub fn oscillating_spec() -> NetworkSpec {
    spec(json!({
        "slots": [int_slot("L"), int_slot("X"), int_slot("Y")],
        "ops": [
            {"id": "anti", "type": "anti_join", "inputs": ["L", "X"], "outputs": ["Y"]},
            {"id": "join", "type": "join", "inputs": ["L", "Y"], "outputs": ["X"]}
        ]
    }))
}

/// Edit that starts the oscillation.
pub fn oscillating_edit() -> (&'static str, DeltaSeq) {
    ("L", vec![Delta::AddTuple(vec![Value::Int(1)].into())])
}

/// `Y = X ⋈ K` and `X := X ∩ Y`: a trigger cycle whose operations only
/// delete. Starts with `X = K = Y = {1, 2, 3}`.
pub fn monotone_deletion_spec() -> NetworkSpec {
    let full = json!({"variables": [{"name": "a", "kind": "int"}], "tuples": [[{"int": 1}], [{"int": 2}], [{"int": 3}]]});
    let mut x = int_slot("X");
    x["content"] = full.clone();
    let mut k = int_slot("K");
    k["content"] = full.clone();
    let mut y = int_slot("Y");
    y["content"] = full;
    spec(json!({
        "slots": [x, k, y],
        "ops": [
            {"id": "join", "type": "join", "inputs": ["X", "K"], "outputs": ["Y"]},
            {"id": "restrict", "type": "restrict", "inputs": ["X", "Y"], "outputs": ["X"]}
        ]
    }))
}

/// Removes `2` from `K`.
pub fn monotone_deletion_edit() -> (&'static str, DeltaSeq) {
    ("K", vec![Delta::RemoveTuple(vec![Value::Int(2)].into())])
}

/// Two models `left` and `right` kept equal up to ids by a bidirectional
/// synchronizer with correspondence model `links`.
pub fn sync_bi_spec() -> NetworkSpec {
    spec(json!({
        "slots": [
            {"id": "left", "kind": "model"},
            {"id": "right", "kind": "model"},
            {"id": "links", "kind": "model", "linking": true}
        ],
        "ops": [
            {"id": "sync", "type": "sync_bi",
             "params": {"vertexMap": {"Node": "Node"}, "edgeMap": {"next": "next"}},
             "inputs": ["left", "right", "links"], "outputs": ["left", "right", "links"]}
        ]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        for s in [bench_spec(), oscillating_spec(), monotone_deletion_spec(), sync_bi_spec()] {
            let (net, val) = s.build().unwrap();
            assert!(net.network_valid(&val));
        }
    }

    #[test]
    fn synthetic_sizes() {
        let g = synthetic_cd(2, 3, 4);
        assert_eq!(g.vertex_count(), 2 + 6 + 24);
        assert_eq!(g.edge_count(), 6 + 24);
        assert_eq!(attribute_update(&g, 1).len(), 12);
    }
}
