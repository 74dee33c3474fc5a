use std::collections::{BTreeMap, BTreeSet};

use egdn::fixtures::{
    attribute_update, bench_spec, monotone_deletion_edit, monotone_deletion_spec,
    oscillating_edit, oscillating_spec, sync_bi_spec, synthetic_cd,
};
use egdn::model::{Content, TypedGraph};
use egdn::network::{Egdn, SlotId, Valuation};
use egdn::scheduler::{
    batch_execute, closure_delta, execute, execute_incremental_fixpoint,
    execute_incremental_ordered, find_valid_update_order, policy_check, Decision, DenyReason,
    ExecOptions, Outcome, Strategy,
};

fn set(items: &[&str]) -> BTreeSet<SlotId> {
    items.iter().map(|s| s.to_string()).collect()
}

fn bench_net(cd: &TypedGraph) -> (Egdn, Valuation) {
    let (mut net, _) = bench_spec().build().unwrap();
    let base = BTreeMap::from([("cd".to_string(), Content::Model(cd.clone()))]);
    let (val, report) = batch_execute(&mut net, &base, &ExecOptions::default()).unwrap();
    assert!(report.completed());
    (net, val)
}

fn assert_same(a: &Valuation, b: &Valuation) {
    for (slot, content) in a.iter() {
        assert_eq!(content, b.content(slot), "slot {slot}");
    }
}

#[test]
fn bench_batch_populates_metrics() {
    let cd = synthetic_cd(2, 3, 2);
    let (net, val) = bench_net(&cd);
    assert!(net.network_valid(&val));
    let asg = val.model("asg");
    assert_eq!(asg.vertices_of_type("Interface").count(), 6);
    assert_eq!(asg.vertices_of_type("Class").count(), 6);
    assert_eq!(asg.vertices_of_type("Field").count(), 12);
    assert_eq!(asg.vertices_of_type("Method").count(), 48);
    // One link per package target, two per class, five per attribute.
    let links = val.model("corr").vertex_count();
    assert_eq!(links, 2 * 2 + 6 * 2 + 12 * 5);
    for slot in ["ipm", "cpm"] {
        let pm = val.assignment(slot);
        assert_eq!(pm.len(), 2, "{slot}");
        for t in pm.tuples() {
            assert_eq!(t.get(1), &egdn::model::Value::Int(12), "{slot}");
        }
    }
}

#[test]
fn bench_incremental_matches_batch() {
    let mut cd = synthetic_cd(2, 3, 1);
    let (mut net, mut val) = bench_net(&cd);
    for round in 1..=3 {
        let edit = attribute_update(&cd, round);
        net.record_edit(&mut val, "cd", &edit, true).unwrap();
        let report = execute_incremental_ordered(&mut net, &mut val).unwrap();
        assert_eq!(report.outcome, Outcome::Completed);
        assert!(net.network_valid(&val));
        cd = val.model("cd").clone();
        let (_, expect) = bench_net(&cd);
        assert_same(&val, &expect);
    }
}

#[test]
fn bench_order_runs_sync_before_queries() {
    let (net, _) = bench_spec().build().unwrap();
    let a = find_valid_update_order(&net, &set(&["cd"])).unwrap();
    let order = a.order.unwrap();
    assert_eq!(order[0], "sync");
    assert!(!a.closure.contains("cd"));
    assert_eq!(
        policy_check(&net, &BTreeSet::new(), "cd").unwrap(),
        Decision::Allow
    );
}

#[test]
fn oscillation_exhausts_budget() {
    let (mut net, mut val) = oscillating_spec().build().unwrap();
    let (slot, edit) = oscillating_edit();
    net.record_edit(&mut val, slot, &edit, true).unwrap();
    let ordered = execute_incremental_ordered(&mut net.clone(), &mut val.clone()).unwrap();
    assert!(matches!(ordered.outcome, Outcome::Aborted { .. }));
    let report = execute_incremental_fixpoint(&mut net, &mut val, 17).unwrap();
    assert_eq!(report.outcome, Outcome::BudgetExceeded { rounds: 17 });
    let d = policy_check(&net, &BTreeSet::new(), "L").unwrap();
    assert!(matches!(d, Decision::Deny(DenyReason::NoOrder { .. })), "{d}");
}

#[test]
fn monotone_deletion_converges() {
    let (mut net, mut val) = monotone_deletion_spec().build().unwrap();
    assert!(net.network_valid(&val));
    let (slot, edit) = monotone_deletion_edit();
    net.record_edit(&mut val, slot, &edit, true).unwrap();
    let opts = ExecOptions {
        strategy: Strategy::Ordered,
        fallback: true,
        max_rounds: 50,
        ..ExecOptions::default()
    };
    let report = execute(&mut net, &mut val, &opts).unwrap();
    assert_eq!(report.outcome, Outcome::Completed);
    assert!(report.fell_back);
    assert!(net.network_valid(&val));
    assert_eq!(val.assignment("X").len(), 2);
}

#[test]
fn sync_bi_edits_on_both_ends_are_denied() {
    let (net, _) = sync_bi_spec().build().unwrap();
    assert_eq!(
        closure_delta(&net, &set(&["right"])).unwrap(),
        set(&["left", "links"])
    );
    assert_eq!(policy_check(&net, &set(&[]), "left").unwrap(), Decision::Allow);
    let d = policy_check(&net, &set(&["left"]), "right").unwrap();
    assert!(matches!(d, Decision::Deny(DenyReason::Overwrite { .. })), "{d}");
}
