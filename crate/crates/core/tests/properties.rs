mod support;

use std::collections::{BTreeMap, BTreeSet};

use egdn::io::{content_from_json, content_to_json, DeltaScript, NetworkSpec};
use egdn::model::{
    AssignmentSet, Content, Delta, Tuple, TypedGraph, Value, ValueKind, Variable, Vertex,
};
use egdn::network::Slot;
use egdn::scheduler::{find_valid_update_order, Skeleton, SkeletonOp};
use ordered_float::OrderedFloat;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use support::cases::CASES;
use support::{random_model, random_net, ModelMutator};

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<i64>().prop_map(Value::Int),
        (-1e9f64..1e9).prop_map(|x| Value::Float(OrderedFloat(x))),
        "[a-z \"\\\\()',]{0,8}".prop_map(Value::String),
        any::<bool>().prop_map(Value::Bool),
        "[a-z][a-z0-9]{0,4}".prop_map(Value::Vertex),
    ]
}

/// Homogeneous tuples over the kinds of the first generated row.
fn tuples() -> impl Strategy<Value = (Vec<Variable>, Vec<Tuple>)> {
    proptest::collection::vec(value(), 1..4).prop_flat_map(|first| {
        let kinds: Vec<ValueKind> = first.iter().map(Value::kind).collect();
        let row = kinds
            .iter()
            .map(|k| value().prop_filter("same kind", { let k = *k; move |v| v.kind() == k }).boxed())
            .collect::<Vec<_>>();
        let vars = kinds
            .iter()
            .enumerate()
            .map(|(i, k)| Variable::new(format!("v{i}"), *k))
            .collect::<Vec<_>>();
        (Just(vars), proptest::collection::vec(row, 0..12))
    })
    .prop_map(|(vars, rows)| (vars, rows.into_iter().map(Tuple::new).collect()))
}

fn set_of(vars: &[Variable], rows: &[Tuple]) -> Content {
    let mut c = Content::Assignment(AssignmentSet::new(vars.to_vec()));
    let mut seen = BTreeSet::new();
    let adds: Vec<Delta> = rows
        .iter()
        .filter(|t| seen.insert((*t).clone()))
        .map(|t| Delta::AddTuple(t.clone()))
        .collect();
    c.apply(&adds).unwrap();
    c
}

fn model(seed: u64, size: usize) -> TypedGraph {
    random_model(&mut StdRng::seed_from_u64(seed), "m", "m", size)
}

proptest! {
    #[test]
    fn model_json_round_trips(seed in any::<u64>(), size in 0usize..40) {
        let c = Content::Model(model(seed, size));
        let back = content_from_json(&Slot::model("m", Some("G")), &content_to_json(&c)).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn set_json_round_trips((vars, rows) in tuples()) {
        let c = set_of(&vars, &rows);
        let back = content_from_json(&Slot::assignment("s", vars.clone()), &content_to_json(&c)).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn spec_json_round_trips(seed in any::<u64>()) {
        let net = random_net(&mut StdRng::seed_from_u64(seed), 30);
        let back = NetworkSpec::from_json(&net.spec.to_json()).unwrap();
        prop_assert_eq!(&back, &net.spec);
        let (_, val) = support::batch(&net.spec, &net.base);
        let with = net.spec.with_contents(&val);
        let again = NetworkSpec::from_json(&with.to_json()).unwrap();
        prop_assert_eq!(&again, &with);
        let (_, reloaded) = again.build().unwrap();
        prop_assert!(support::first_difference(&val, &reloaded).is_none());
    }

    #[test]
    fn delta_script_round_trips(
        seed in any::<u64>(),
        payload in "[a-z \"\\\\]{0,6}",
        (vars, rows) in tuples(),
    ) {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = model(seed, 10);
        let mut edit = ModelMutator::new(g, "x").edit(&mut rng, 6, 40);
        edit.push(Delta::AddVertex(Vertex::new("q", "A").with_payload(Value::String(payload))));
        let set = set_of(&vars, &rows);
        let tuples = set.seed_deltas();
        let script = DeltaScript::from_deltas([("m", edit.as_slice()), ("s", tuples.as_slice())]);
        let back = DeltaScript::parse(&script.to_string()).unwrap();
        prop_assert_eq!(back, script);
    }

    #[test]
    fn inverse_edit_restores_content(seed in any::<u64>(), size in 0usize..40, n in 1usize..12) {
        let mut rng = StdRng::seed_from_u64(seed);
        let before = Content::Model(model(seed, size));
        let mut m = ModelMutator::new(before.as_model().unwrap().clone(), "x");
        let edit = m.edit(&mut rng, n, 60);
        let undo: Vec<Delta> = edit.iter().rev().map(Delta::inverse).collect();
        let after = before.applied(&edit).unwrap();
        prop_assert_eq!(after.applied(&undo).unwrap(), before);
    }

    #[test]
    fn diff_reproduces_target(a in any::<u64>(), b in any::<u64>(), sa in 0usize..30, sb in 0usize..30) {
        let (x, y) = (Content::Model(model(a, sa)), Content::Model(model(b, sb)));
        let d = x.diff(&y).unwrap();
        prop_assert_eq!(x.applied(&d).unwrap(), y.clone());
        prop_assert!(y.diff(&y).unwrap().is_empty());
    }

    #[test]
    fn operator_update_matches_batch(which in 0..CASES.len(), seed in any::<u64>()) {
        let (name, case) = CASES[which];
        let c = case(&mut StdRng::seed_from_u64(seed));
        let check = support::check_operator(&c.spec, &c.base, "o", &c.edits);
        prop_assert!(check.consistent, "{} update differs from batch", name);
        prop_assert_eq!(check.second, 0, "{} emitted on a second update", name);
    }

    #[test]
    fn order_respects_trigger_edges(
        rows in proptest::collection::vec((0u8..8, 1u8..8, 0u8..8), 1..8),
        changed in 1u8..8,
    ) {
        let names = |m: u8| -> BTreeSet<String> {
            (0..3).filter(|s| m & (1 << s) != 0).map(|s| format!("s{s}")).collect()
        };
        let ops: BTreeMap<String, SkeletonOp> = rows
            .iter()
            .enumerate()
            .map(|(i, &(ins, outs, dir))| {
                let per_input = names(ins).into_iter().map(|s| (s, names(dir & outs))).collect();
                let op = SkeletonOp {
                    inputs: names(ins),
                    outputs: names(outs),
                    base: BTreeSet::new(),
                    per_input,
                    non_recursive: true,
                };
                (format!("o{i}"), op)
            })
            .collect();
        let sk = Skeleton::new(ops);
        let changed: BTreeSet<String> = names(changed).into_iter().filter(|s| sk.slots().contains(s)).collect();
        let a = find_valid_update_order(&sk, &changed).unwrap();
        prop_assert_eq!(a.order.is_some(), a.trigger.acyclic);
        if let Some(order) = a.order {
            let pos: BTreeMap<&String, usize> = order.iter().enumerate().map(|(i, o)| (o, i)).collect();
            prop_assert_eq!(pos.len(), a.trigger.vertices.len());
            for (x, y) in &a.trigger.edges {
                prop_assert!(pos[x] < pos[y]);
            }
            let outs: BTreeSet<String> = sk.ops().values().flat_map(|o| o.outputs.iter().cloned()).collect();
            prop_assert!(a.closure.is_subset(&outs));
        } else {
            let cycle = a.cycle.unwrap();
            prop_assert_eq!(cycle.first(), cycle.last());
        }
    }
}
