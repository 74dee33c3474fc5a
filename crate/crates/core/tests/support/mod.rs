//! Generators shared by the acceptance and property targets.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

pub mod cases;

use egdn::io::NetworkSpec;
use egdn::model::{Content, Delta, Edge, Tuple, TypedGraph, Value, Vertex};
use egdn::network::{Egdn, SlotId, UpdateInput, Valuation};
use egdn::scheduler::{batch_execute, ExecOptions};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value as Json};

pub const EDGE_TYPES: [(&str, &str, &str); 3] = [("ab", "A", "B"), ("aa", "A", "A"), ("ba", "B", "A")];

/// Two valued vertex types with three edge types between them.
pub fn type_graphs() -> Json {
    json!({"G": {
        "vertexTypes": ["A", "B"],
        "valueTypes": ["A", "B"],
        "edgeTypes": EDGE_TYPES
            .iter()
            .map(|(n, s, t)| json!({"name": n, "src": s, "tgt": t}))
            .collect::<Vec<_>>()
    }})
}

pub fn model_slot(id: &str) -> Json {
    json!({"id": id, "kind": "model", "typeGraph": "G"})
}

pub fn linking_slot(id: &str) -> Json {
    json!({"id": id, "kind": "model", "linking": true})
}

/// Variable names carry their kind, so joins never meet a kind clash.
pub fn kind_of(var: &str) -> &'static str {
    match var {
        "a" | "a2" | "b" => "vertex",
        "e" => "edge",
        v if v.starts_with('f') => "bool",
        v if v.starts_with('r') => "float",
        _ => "int",
    }
}

pub fn set_slot(id: &str, vars: &[String]) -> Json {
    let vars: Vec<Json> = vars
        .iter()
        .map(|v| json!({"name": v, "kind": kind_of(v)}))
        .collect();
    json!({"id": id, "kind": "assignment", "vars": vars})
}

pub fn build(spec: &Json) -> NetworkSpec {
    serde_json::from_value(spec.clone()).expect("generated spec deserializes")
}

/// Produces valid deltas against a working copy of one model.
pub struct ModelMutator {
    pub content: Content,
    fresh: usize,
    prefix: &'static str,
}

impl ModelMutator {
    pub fn new(graph: TypedGraph, prefix: &'static str) -> Self {
        let fresh = graph.vertex_count() + graph.edge_count();
        ModelMutator {
            content: Content::Model(graph),
            fresh,
            prefix,
        }
    }

    pub fn graph(&self) -> &TypedGraph {
        self.content.as_model().expect("model content")
    }

    fn id(&mut self, kind: &str) -> String {
        loop {
            self.fresh += 1;
            let id = format!("{}{kind}{}", self.prefix, self.fresh);
            let g = self.graph();
            if g.vertex(&id).is_none() && g.edge(&id).is_none() {
                return id;
            }
        }
    }

    fn add_vertex(&mut self, rng: &mut StdRng) -> Vec<Delta> {
        let ty = if rng.gen_bool(0.5) { "A" } else { "B" };
        let id = self.id("v");
        vec![Delta::AddVertex(Vertex::new(id, ty).with_payload(Value::Int(rng.gen_range(0..6))))]
    }

    fn add_edge(&mut self, rng: &mut StdRng) -> Vec<Delta> {
        let (ty, s, t) = *EDGE_TYPES.choose(rng).unwrap();
        let g = self.graph();
        let srcs: Vec<String> = g.vertices_of_type(s).map(|v| v.id.clone()).collect();
        let tgts: Vec<String> = g.vertices_of_type(t).map(|v| v.id.clone()).collect();
        match (srcs.choose(rng), tgts.choose(rng)) {
            (Some(a), Some(b)) => {
                let (a, b) = (a.clone(), b.clone());
                let id = self.id("e");
                vec![Delta::AddEdge(Edge::new(id, ty, a, b))]
            }
            _ => Vec::new(),
        }
    }

    /// One atomic change, or a vertex removal preceded by its incident edges.
    pub fn step(&mut self, rng: &mut StdRng, max_len: usize, budget: usize) -> Vec<Delta> {
        let g = self.graph();
        let room = g.len() < max_len;
        let out = match rng.gen_range(0..4) {
            0 if room => self.add_vertex(rng),
            1 if room => self.add_edge(rng),
            2 if g.edge_count() > 0 => {
                let edges: Vec<&Edge> = g.edges().collect();
                vec![Delta::RemoveEdge((*edges.choose(rng).unwrap()).clone())]
            }
            3 if g.vertex_count() > 0 => {
                let vs: Vec<&Vertex> = g.vertices().collect();
                let v = (*vs.choose(rng).unwrap()).clone();
                let incident: BTreeSet<Edge> = g
                    .edges()
                    .filter(|e| e.src.as_local() == Some(&v.id) || e.tgt.as_local() == Some(&v.id))
                    .cloned()
                    .collect();
                if incident.len() + 1 > budget {
                    return Vec::new();
                }
                let mut out: Vec<Delta> = incident.into_iter().map(Delta::RemoveEdge).collect();
                out.push(Delta::RemoveVertex(v));
                out
            }
            _ if room => self.add_vertex(rng),
            _ => Vec::new(),
        };
        self.content.apply(&out).expect("mutator deltas are valid");
        out
    }

    /// Up to `n` deltas.
    pub fn edit(&mut self, rng: &mut StdRng, n: usize, max_len: usize) -> Vec<Delta> {
        let mut out = Vec::new();
        for _ in 0..n * 4 {
            if out.len() >= n {
                break;
            }
            out.extend(self.step(rng, max_len, n - out.len()));
        }
        out
    }
}

pub fn random_model(rng: &mut StdRng, id: &str, prefix: &'static str, size: usize) -> TypedGraph {
    let mut m = ModelMutator::new(TypedGraph::new(id), prefix);
    while m.graph().len() < size {
        let d = if rng.gen_bool(0.5) || m.graph().vertex_count() < 2 {
            m.add_vertex(rng)
        } else {
            m.add_edge(rng)
        };
        m.content.apply(&d).unwrap();
    }
    m.graph().clone()
}

/// Adds or removes single tuples of a set whose values are drawn from `draw`.
pub fn tuple_edit(
    rng: &mut StdRng,
    content: &mut Content,
    n: usize,
    max_len: usize,
    mut draw: impl FnMut(&mut StdRng) -> Tuple,
) -> Vec<Delta> {
    let mut out = Vec::new();
    for _ in 0..n {
        let set = content.as_assignment().unwrap();
        let d = if set.len() > 0 && (set.len() >= max_len || rng.gen_bool(0.4)) {
            let ts: Vec<&Tuple> = set.tuples().collect();
            Delta::RemoveTuple((*ts.choose(rng).unwrap()).clone())
        } else {
            let t = draw(rng);
            if set.contains(&t) {
                continue;
            }
            Delta::AddTuple(t)
        };
        content.apply(std::slice::from_ref(&d)).unwrap();
        out.push(d);
    }
    out
}

/// A generated network: its spec and the contents of its user slots.
pub struct RandomNet {
    pub spec: NetworkSpec,
    pub base: BTreeMap<SlotId, Content>,
    pub ops: Vec<String>,
}

struct Pools {
    models: Vec<String>,
    sets: Vec<(String, Vec<String>)>,
    slots: Vec<Json>,
    ops: Vec<Json>,
    kinds: Vec<String>,
}

fn op(id: &str, ty: &str, params: Json, inputs: &[&str], outputs: &[&str]) -> Json {
    json!({"id": id, "type": ty, "params": params, "inputs": inputs, "outputs": outputs})
}

fn int_var(vars: &[String]) -> Vec<String> {
    vars.iter().filter(|v| kind_of(v) == "int").cloned().collect()
}

fn subset(rng: &mut StdRng, vars: &[String], nonempty: bool) -> Vec<String> {
    loop {
        let s: Vec<String> = vars.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        if !nonempty || !s.is_empty() || vars.is_empty() {
            return s;
        }
    }
}

pub fn composite_child() -> Json {
    json!({
        "typeGraphs": type_graphs(),
        "slots": [model_slot("in"), set_slot("vs", &["a".into(), "pa".into()]),
                  set_slot("out", &["total".into()])],
        "ops": [
            op("nodes", "node_input", json!({"type": "A"}), &["in"], &["vs"]),
            op("sum", "group_sum", json!({"by": [], "of": "pa"}), &["vs"], &["out"])
        ]
    })
}

pub fn sync_rules() -> Json {
    json!({"rules": [
        {"name": "a", "sourceType": "A", "targets": [{"key": "x", "type": "A", "copyPayload": true}]},
        {"name": "b", "sourceType": "B", "parent": {"edgeType": "ab", "rule": "a"},
         "targets": [{"key": "y", "type": "B", "copyPayload": true}],
         "edges": [{"key": "in", "type": "ab", "src": "parent.x", "tgt": "y"}]}
    ]})
}

impl Pools {
    fn try_op(&mut self, rng: &mut StdRng, i: usize) -> bool {
        let id = format!("o{i}");
        let out = format!("s{i}");
        let pick_set = |rng: &mut StdRng, sets: &[(String, Vec<String>)]| sets.choose(rng).cloned();
        let (json, produced): (Json, Option<Vec<String>>) = match rng.gen_range(0..11) {
            0 => {
                let m = self.models.choose(rng).unwrap().clone();
                let (ty, v, p) = if rng.gen_bool(0.5) { ("A", "a", "pa") } else { ("B", "b", "pb") };
                let mut vars = vec![v.to_string()];
                if rng.gen_bool(0.7) {
                    vars.push(p.to_string());
                }
                (op(&id, "node_input", json!({"type": ty}), &[&m], &[&out]), Some(vars))
            }
            1 => {
                let m = self.models.choose(rng).unwrap().clone();
                let (ty, s, t) = *EDGE_TYPES.choose(rng).unwrap();
                let name = |ty: &str| if ty == "A" { "a" } else { "b" };
                let (s, t) = (name(s), if s == t { "a2" } else { name(t) });
                let vars = vec!["e".to_string(), s.to_string(), t.to_string()];
                (op(&id, "edge_input", json!({"type": ty}), &[&m], &[&out]), Some(vars))
            }
            2 => {
                let m = self.models.choose(rng).unwrap().clone();
                let mut choices: Vec<(String, Vec<&str>)> = vec![
                    ("a:A -ab-> b:B".into(), vec!["a", "b"]),
                    ("a:A -aa-> a2:A".into(), vec!["a", "a2"]),
                    ("a:A -ab-> b:B; b -ba-> a2:A".into(), vec!["a", "b", "a2"]),
                    ("a:A -ab-> b:B; where a < b".into(), vec!["a", "b"]),
                    ("a:A; where a > 2".into(), vec!["a"]),
                ];
                let deps: Vec<&(String, Vec<String>)> = self
                    .sets
                    .iter()
                    .filter(|(_, vs)| vs.iter().any(|v| v == "a"))
                    .filter(|(_, vs)| vs.iter().all(|v| v != "b" && v != "a2"))
                    .collect();
                if let Some((dep, _)) = deps.choose(rng) {
                    let sign = if rng.gen_bool(0.5) { '+' } else { '!' };
                    choices.push((format!("a:A -ab-> b:B; {sign}{dep}"), vec!["a", "b"]));
                }
                let (text, vars) = choices.choose(rng).unwrap().clone();
                let mut inputs = vec![m];
                if let Some(dep) = text.split(['+', '!']).nth(1) {
                    inputs.push(dep.to_string());
                }
                let ins: Vec<&str> = inputs.iter().map(String::as_str).collect();
                (
                    op(&id, "pattern", json!({"pattern": text}), &ins, &[&out]),
                    Some(vars.iter().map(|v| v.to_string()).collect()),
                )
            }
            3 | 4 => {
                let (Some((l, lv)), Some((r, rv))) = (pick_set(rng, &self.sets), pick_set(rng, &self.sets))
                else {
                    return false;
                };
                if l == r || !lv.iter().any(|v| rv.contains(v)) {
                    return false;
                }
                if rng.gen_bool(0.5) {
                    let mut vars = lv.clone();
                    vars.extend(rv.iter().filter(|v| !lv.contains(v)).cloned());
                    if vars.len() > 6 {
                        return false;
                    }
                    (op(&id, "join", json!({}), &[&l, &r], &[&out]), Some(vars))
                } else {
                    (op(&id, "anti_join", json!({}), &[&l, &r], &[&out]), Some(lv))
                }
            }
            5 => {
                let Some((s, vs)) = pick_set(rng, &self.sets) else {
                    return false;
                };
                let by = subset(rng, &vs, true);
                let mut vars = by.clone();
                vars.push(format!("n{i}"));
                (op(&id, "group_count", json!({"by": by}), &[&s], &[&out]), Some(vars))
            }
            6 | 7 | 8 => {
                let Some((s, vs)) = pick_set(rng, &self.sets) else {
                    return false;
                };
                let Some(x) = int_var(&vs).choose(rng).cloned() else {
                    return false;
                };
                let rest: Vec<String> = vs.iter().filter(|v| **v != x).cloned().collect();
                match rng.gen_range(0..3) {
                    0 => {
                        let by = subset(rng, &rest, false);
                        let mut vars = by.clone();
                        vars.push(format!("t{i}"));
                        (op(&id, "group_sum", json!({"by": by, "of": x}), &[&s], &[&out]), Some(vars))
                    }
                    1 => {
                        let by = subset(rng, &rest, false);
                        let mut vars = by.clone();
                        vars.push(format!("g{i}"));
                        let expr = format!("max({x}) - min({x}) + count()");
                        (op(&id, "group_expr", json!({"by": by, "expr": expr}), &[&s], &[&out]), Some(vars))
                    }
                    _ => {
                        let mut vars = vs.clone();
                        let expr = if rng.gen_bool(0.5) {
                            vars.push(format!("x{i}"));
                            format!("{x} * 2 + 1")
                        } else {
                            vars.push(format!("f{i}"));
                            format!("{x} > 2")
                        };
                        (op(&id, "expression", json!({"expr": expr}), &[&s], &[&out]), Some(vars))
                    }
                }
            }
            9 => {
                let m = self.models.choose(rng).unwrap().clone();
                let (t, c) = (format!("m{i}"), format!("c{i}"));
                self.slots.push(model_slot(&t));
                self.slots.push(linking_slot(&c));
                self.models.push(t.clone());
                self.ops.push(op(&id, "sync_uni", json!({"rules": sync_rules()}), &[&m], &[&t, &c]));
                self.kinds.push("sync_uni".into());
                return true;
            }
            _ => {
                let m = self.models.choose(rng).unwrap().clone();
                let params = json!({"network": composite_child(), "inputs": {m.clone(): "in"},
                                    "outputs": {out.clone(): "out"}});
                (op(&id, "composite", params, &[&m], &[&out]), Some(vec!["total".into()]))
            }
        };
        let vars = produced.expect("set-producing operation");
        self.slots.push(set_slot(&out, &vars));
        self.kinds.push(json["type"].as_str().unwrap().to_string());
        self.ops.push(json);
        self.sets.push((out, vars));
        true
    }
}

/// Layered network of `2..=8` operations over one or two user models and
/// possibly a user set of integers; every operation writes fresh slots, so
/// the trigger graph is acyclic.
pub fn random_net(rng: &mut StdRng, max_model: usize) -> RandomNet {
    let mut base = BTreeMap::new();
    let mut pools = Pools {
        models: vec!["m".into()],
        sets: Vec::new(),
        slots: vec![model_slot("m")],
        ops: Vec::new(),
        kinds: Vec::new(),
    };
    let size = rng.gen_range(0..=max_model * 3 / 4);
    base.insert("m".to_string(), Content::Model(random_model(rng, "m", "m", size)));
    if rng.gen_bool(0.4) {
        pools.models.push("w".into());
        pools.slots.push(model_slot("w"));
        let size = rng.gen_range(0..=max_model / 2);
        base.insert("w".to_string(), Content::Model(random_model(rng, "w", "w", size)));
    }
    if rng.gen_bool(0.4) {
        let vars = vec!["pa".to_string()];
        pools.slots.push(set_slot("u", &vars));
        pools.sets.push(("u".into(), vars.clone()));
        let mut set = Content::Assignment(egdn::model::AssignmentSet::new(vec![
            egdn::model::Variable::new("pa", egdn::model::ValueKind::Int),
        ]));
        let n = rng.gen_range(0..6);
        tuple_edit(rng, &mut set, n, 6, |r| Tuple::new(vec![Value::Int(r.gen_range(0..6))]));
        base.insert("u".to_string(), set);
    }
    let n_ops = rng.gen_range(2..=8);
    let mut i = 0;
    while pools.ops.len() < n_ops {
        if pools.try_op(rng, i) {
            i += 1;
        }
    }
    let spec = json!({"typeGraphs": type_graphs(), "slots": pools.slots, "ops": pools.ops});
    RandomNet {
        spec: build(&spec),
        base,
        ops: pools.kinds,
    }
}

pub fn batch(spec: &NetworkSpec, base: &BTreeMap<SlotId, Content>) -> (Egdn, Valuation) {
    let (mut net, _) = spec.build().expect("spec builds");
    let (val, report) = batch_execute(&mut net, base, &ExecOptions::default()).expect("batch runs");
    assert!(report.completed(), "batch ended with {}", report.outcome);
    (net, val)
}

/// First slot on which two valuations differ.
pub fn first_difference(a: &Valuation, b: &Valuation) -> Option<SlotId> {
    let slots: BTreeSet<&SlotId> = a.slots().chain(b.slots()).collect();
    slots.into_iter().find(|s| a.get(s) != b.get(s)).cloned()
}

/// Outcome of checking a single operation against its batch semantics.
#[derive(Debug)]
pub struct OpCheck {
    /// Whether the outputs after one update equal the batch result.
    pub consistent: bool,
    /// Deltas emitted by a second update fed only the node's own writes.
    pub second: usize,
}

/// Runs one update of operation `op` after `edits`, then a second update
/// that sees only what the first wrote to slots the node also reads.
pub fn check_operator(
    spec: &NetworkSpec,
    base: &BTreeMap<SlotId, Content>,
    op: &str,
    edits: &[(SlotId, Vec<Delta>)],
) -> OpCheck {
    let (mut net, mut val) = batch(spec, base);
    let mut node = net.op(op).unwrap().operator().box_clone();
    node.load(&val).unwrap();
    for (slot, deltas) in edits {
        net.record_edit(&mut val, slot, deltas, false).unwrap();
    }
    let cache = net.op(op).unwrap().cache().clone();
    let out = node
        .update(UpdateInput {
            valuation: &val,
            cache: &cache,
        })
        .unwrap();
    for (slot, deltas) in &out {
        net.record_edit(&mut val, slot, deltas, false).unwrap();
    }
    let consistent = node.is_consistent(&val).unwrap();
    let reads: BTreeSet<SlotId> = node.ports().inputs.into_iter().collect();
    let own: BTreeMap<SlotId, Vec<Delta>> = out
        .into_iter()
        .filter(|(s, d)| reads.contains(s) && !d.is_empty())
        .collect();
    let again = node
        .update(UpdateInput {
            valuation: &val,
            cache: &own,
        })
        .unwrap();
    OpCheck {
        consistent,
        second: again.values().map(Vec::len).sum(),
    }
}
