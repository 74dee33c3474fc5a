//! Single-operation networks with random inputs of at most 30 elements and a
//! random edit; the operation under test is always `o`.

use std::collections::BTreeMap;

use egdn::io::NetworkSpec;
use egdn::model::{AssignmentSet, Content, Delta, Tuple, Value, ValueKind, Variable};
use egdn::network::SlotId;
use ordered_float::OrderedFloat;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value as Json};

use super::{
    build, kind_of, linking_slot, model_slot, random_model, set_slot, sync_rules, tuple_edit,
    type_graphs, ModelMutator, EDGE_TYPES,
};

pub const MAX: usize = 30;

pub struct OpCase {
    pub spec: NetworkSpec,
    pub base: BTreeMap<SlotId, Content>,
    pub edits: Vec<(SlotId, Vec<Delta>)>,
}

pub type CaseFn = fn(&mut StdRng) -> OpCase;

pub const CASES: [(&str, CaseFn); 15] = [
    ("node_input", node_input),
    ("edge_input", edge_input),
    ("pattern", pattern),
    ("join", join),
    ("anti_join", anti_join),
    ("group_count", group_count),
    ("group_sum", group_sum),
    ("group_sum_float", group_sum_float),
    ("group_expr", group_expr),
    ("expression", expression),
    ("restrict", restrict),
    ("sync_uni", sync_uni),
    ("sync_bi", sync_bi),
    ("composite", composite),
    ("pattern_deps", pattern_deps),
];

fn strings(vars: &[&str]) -> Vec<String> {
    vars.iter().map(|v| v.to_string()).collect()
}

fn kind(name: &str) -> ValueKind {
    serde_json::from_value(json!(kind_of(name))).unwrap()
}

fn empty_set(vars: &[&str]) -> Content {
    Content::Assignment(AssignmentSet::new(
        vars.iter().map(|v| Variable::new(*v, kind(v))).collect(),
    ))
}

fn int_tuple(rng: &mut StdRng, arity: usize) -> Tuple {
    Tuple::new((0..arity).map(|_| Value::Int(rng.gen_range(0..5))).collect())
}

/// Random set plus an edit, both drawn with `draw`.
fn random_set(
    rng: &mut StdRng,
    vars: &[&str],
    mut draw: impl FnMut(&mut StdRng) -> Tuple,
) -> (Content, Vec<Delta>) {
    let mut c = empty_set(vars);
    let n = rng.gen_range(0..=MAX);
    tuple_edit(rng, &mut c, n, MAX, &mut draw);
    let mut after = c.clone();
    let k = rng.gen_range(1..=5);
    let edit = tuple_edit(rng, &mut after, k, MAX, &mut draw);
    (c, edit)
}

fn spec(slots: Vec<Json>, op: Json) -> NetworkSpec {
    build(&json!({"typeGraphs": type_graphs(), "slots": slots, "ops": [op]}))
}

fn model_case(rng: &mut StdRng, slots: Vec<Json>, op: Json) -> OpCase {
    let size = rng.gen_range(0..=MAX);
    let m = random_model(rng, "m", "m", size);
    let k = rng.gen_range(1..=5);
    let edit = ModelMutator::new(m.clone(), "x").edit(rng, k, MAX);
    OpCase {
        spec: spec(slots, op),
        base: BTreeMap::from([("m".to_string(), Content::Model(m))]),
        edits: vec![("m".to_string(), edit)],
    }
}

fn node_input(rng: &mut StdRng) -> OpCase {
    let (ty, vars) = match rng.gen_range(0..3) {
        0 => ("A", strings(&["a", "pa"])),
        1 => ("B", strings(&["b", "pb"])),
        _ => ("A", strings(&["a"])),
    };
    let op = json!({"id": "o", "type": "node_input", "params": {"type": ty}, "inputs": ["m"], "outputs": ["s"]});
    model_case(rng, vec![model_slot("m"), set_slot("s", &vars)], op)
}

fn edge_input(rng: &mut StdRng) -> OpCase {
    let (ty, src, tgt) = *EDGE_TYPES.choose(rng).unwrap();
    let name = |t: &str| if t == "A" { "a" } else { "b" };
    let vars = strings(&["e", name(src), if src == tgt { "a2" } else { name(tgt) }]);
    let op = json!({"id": "o", "type": "edge_input", "params": {"type": ty}, "inputs": ["m"], "outputs": ["s"]});
    model_case(rng, vec![model_slot("m"), set_slot("s", &vars)], op)
}

fn pattern(rng: &mut StdRng) -> OpCase {
    let (text, vars) = [
        ("a:A -ab-> b:B", vec!["a", "b"]),
        ("a:A -aa-> a2:A", vec!["a", "a2"]),
        ("a:A -ab-> b:B; b -ba-> a2:A", vec!["a", "b", "a2"]),
        ("a:A -ab-> b:B; a2:A -ab-> b", vec!["a", "b", "a2"]),
        ("a:A -ab-> b:B; where a < b", vec!["a", "b"]),
        ("a:A -aa-> a2:A; where a + a2 > 4", vec!["a", "a2"]),
        ("a:A; b:B; cross; where a == b", vec!["a", "b"]),
    ]
    .choose(rng)
    .unwrap()
    .clone();
    let op = json!({"id": "o", "type": "pattern", "params": {"pattern": text}, "inputs": ["m"], "outputs": ["s"]});
    model_case(rng, vec![model_slot("m"), set_slot("s", &strings(&vars))], op)
}

/// Pattern guarded by another slot; both the model and the guard change.
fn pattern_deps(rng: &mut StdRng) -> OpCase {
    let sign = if rng.gen_bool(0.5) { "+" } else { "!" };
    let text = format!("a:A -ab-> b:B; {sign}d");
    let op = json!({"id": "o", "type": "pattern", "params": {"pattern": text}, "inputs": ["m", "d"], "outputs": ["s"]});
    let mut case = model_case(
        rng,
        vec![model_slot("m"), set_slot("d", &strings(&["a"])), set_slot("s", &strings(&["a", "b"]))],
        op,
    );
    let Content::Model(m) = &case.base["m"] else { unreachable!() };
    let mut ids: Vec<String> = m.vertices_of_type("A").map(|v| v.id.clone()).collect();
    ids.push("nowhere".into());
    let (d, edit) = random_set(rng, &["a"], |r| Tuple::new(vec![Value::Vertex(ids.choose(r).unwrap().clone())]));
    case.base.insert("d".into(), d);
    case.edits.push(("d".into(), edit));
    case
}

fn two_sets(rng: &mut StdRng, ty: &str, out: &[&str]) -> OpCase {
    let (l, le) = random_set(rng, &["k", "x"], |r| int_tuple(r, 2));
    let (r, re) = random_set(rng, &["k", "y"], |r| int_tuple(r, 2));
    let op = json!({"id": "o", "type": ty, "inputs": ["l", "r"], "outputs": ["s"]});
    let slots = vec![
        set_slot("l", &strings(&["k", "x"])),
        set_slot("r", &strings(&["k", "y"])),
        set_slot("s", &strings(out)),
    ];
    OpCase {
        spec: spec(slots, op),
        base: BTreeMap::from([("l".to_string(), l), ("r".to_string(), r)]),
        edits: vec![("l".into(), le), ("r".into(), re)],
    }
}

fn join(rng: &mut StdRng) -> OpCase {
    two_sets(rng, "join", &["k", "x", "y"])
}

fn anti_join(rng: &mut StdRng) -> OpCase {
    two_sets(rng, "anti_join", &["k", "x"])
}

fn one_set(rng: &mut StdRng, vars: &[&str], draw: impl FnMut(&mut StdRng) -> Tuple, op: Json, out: &[&str]) -> OpCase {
    let (s, edit) = random_set(rng, vars, draw);
    let slots = vec![set_slot("i", &strings(vars)), set_slot("s", &strings(out))];
    let op = json!({"id": "o", "type": op["type"], "params": op["params"], "inputs": ["i"], "outputs": ["s"]});
    OpCase {
        spec: spec(slots, op),
        base: BTreeMap::from([("i".to_string(), s)]),
        edits: vec![("i".into(), edit)],
    }
}

fn group_count(rng: &mut StdRng) -> OpCase {
    let by: &[&str] = [&["k"][..], &["k", "x"], &[]].choose(rng).unwrap();
    let mut out = by.to_vec();
    out.push("n");
    one_set(rng, &["k", "x"], |r| int_tuple(r, 2), json!({"type": "group_count", "params": {"by": by}}), &out)
}

fn group_sum(rng: &mut StdRng) -> OpCase {
    let by: &[&str] = [&["k"][..], &[]].choose(rng).unwrap();
    let mut out = by.to_vec();
    out.push("t");
    one_set(rng, &["k", "x"], |r| int_tuple(r, 2), json!({"type": "group_sum", "params": {"by": by, "of": "x"}}), &out)
}

fn group_sum_float(rng: &mut StdRng) -> OpCase {
    let draw = |r: &mut StdRng| {
        let x = r.gen_range(-20..20) as f64 * 0.1;
        Tuple::new(vec![Value::Int(r.gen_range(0..4)), Value::Float(OrderedFloat(x))])
    };
    let params = json!({"type": "group_sum", "params": {"by": ["k"], "of": "rx"}});
    one_set(rng, &["k", "rx"], draw, params, &["k", "rsum"])
}

fn group_expr(rng: &mut StdRng) -> OpCase {
    let (expr, result) = *[("max(x) - min(x) + count()", "g"), ("avg(x)", "ravg"), ("sum(x * k)", "g")]
        .choose(rng)
        .unwrap();
    let params = json!({"type": "group_expr", "params": {"by": ["k"], "expr": expr}});
    one_set(rng, &["k", "x"], |r| int_tuple(r, 2), params, &["k", result])
}

fn expression(rng: &mut StdRng) -> OpCase {
    let (expr, result) = *[("x * 2 + k", "z"), ("x > k", "f"), ("x - k * k", "z")].choose(rng).unwrap();
    let params = json!({"type": "expression", "params": {"expr": expr}});
    one_set(rng, &["k", "x"], |r| int_tuple(r, 2), params, &["k", "x", result])
}

fn restrict(rng: &mut StdRng) -> OpCase {
    let (t, te) = random_set(rng, &["k"], |r| int_tuple(r, 1));
    let (f, fe) = random_set(rng, &["k"], |r| int_tuple(r, 1));
    let op = json!({"id": "o", "type": "restrict", "inputs": ["t", "f"], "outputs": ["t"]});
    let slots = vec![set_slot("t", &strings(&["k"])), set_slot("f", &strings(&["k"]))];
    // The target edit is drawn against its unrestricted base; keep only
    // the deltas still applicable after the batch run restricts it.
    let mut seen: std::collections::BTreeSet<Tuple> = t.as_assignment().unwrap().tuples().cloned().collect();
    let kept: Vec<Delta> = te
        .into_iter()
        .filter(|d| matches!(d, Delta::AddTuple(x) if seen.insert(x.clone())))
        .collect();
    let mut edits = vec![("f".to_string(), fe)];
    if !kept.is_empty() {
        edits.push(("t".to_string(), kept));
    }
    OpCase {
        spec: spec(slots, op),
        base: BTreeMap::from([("t".to_string(), t), ("f".to_string(), f)]),
        edits,
    }
}

fn sync_uni(rng: &mut StdRng) -> OpCase {
    let op = json!({"id": "o", "type": "sync_uni", "params": {"rules": sync_rules()}, "inputs": ["m"], "outputs": ["t", "c"]});
    model_case(rng, vec![model_slot("m"), model_slot("t"), linking_slot("c")], op)
}

fn sync_bi(rng: &mut StdRng) -> OpCase {
    let map = json!({"vertexMap": {"A": "A", "B": "B"}, "edgeMap": {"ab": "ab", "aa": "aa", "ba": "ba"}});
    let op = json!({"id": "o", "type": "sync_bi", "params": map,
                    "inputs": ["m", "r", "c"], "outputs": ["m", "r", "c"]});
    let mut case = model_case(rng, vec![model_slot("m"), model_slot("r"), linking_slot("c")], op);
    if rng.gen_bool(0.5) {
        // Edit the other end instead, starting from its synchronized state.
        let (net, val) = super::batch(&case.spec, &case.base);
        drop(net);
        let r = val.model("r").clone();
        let k = rng.gen_range(1..=5);
        let edit = ModelMutator::new(r, "y").edit(rng, k, MAX);
        case.edits = vec![("r".to_string(), edit)];
    }
    case
}

fn composite(rng: &mut StdRng) -> OpCase {
    let params = json!({"network": super::composite_child(), "inputs": {"m": "in"}, "outputs": {"s": "out"}});
    let op = json!({"id": "o", "type": "composite", "params": params, "inputs": ["m"], "outputs": ["s"]});
    model_case(rng, vec![model_slot("m"), set_slot("s", &strings(&["total"]))], op)
}
