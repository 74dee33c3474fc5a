use std::collections::{BTreeSet, HashMap};

use crate::model::{
    normalize_tuples, AssignmentSet, Delta, DeltaSeq, Tuple, Value, Variable,
};
use crate::network::{Properties, SlotDeltas, SlotTable, Valuation};

pub(crate) fn model_slot(slots: &SlotTable, id: &str) -> Result<(), String> {
    match slots.get(id) {
        Some(s) if s.is_model() => Ok(()),
        Some(_) => Err(format!("slot `{id}` must hold a model")),
        None => Err(format!("unknown slot `{id}`")),
    }
}

pub(crate) fn assignment_vars(slots: &SlotTable, id: &str) -> Result<Vec<Variable>, String> {
    match slots.get(id).map(|s| s.vars()) {
        Some(Some(vars)) => Ok(vars.to_vec()),
        Some(None) => Err(format!("slot `{id}` must hold assignments")),
        None => Err(format!("unknown slot `{id}`")),
    }
}

pub(crate) fn expect_vars(slot: &str, got: &[Variable], want: &[Variable]) -> Result<(), String> {
    if got != want {
        let show = |vs: &[Variable]| {
            vs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
        };
        return Err(format!(
            "slot `{slot}` has variables ({}), expected ({})",
            show(got),
            show(want)
        ));
    }
    Ok(())
}

pub(crate) fn props(fully_incremental: bool) -> Properties {
    Properties {
        non_recursive: true,
        union_monotonic: true,
        fully_incremental,
    }
}

/// Positions of `names` within `vars`.
pub(crate) fn positions(vars: &[Variable], names: &[String]) -> Result<Vec<usize>, String> {
    names
        .iter()
        .map(|n| {
            vars.iter()
                .position(|v| &v.name == n)
                .ok_or_else(|| format!("unknown variable `{n}`"))
        })
        .collect()
}

/// Tuple deltas of a cache entry, as (added?, tuple) pairs.
pub(crate) fn tuple_changes(deltas: &[Delta]) -> impl Iterator<Item = (bool, &Tuple)> {
    deltas.iter().filter_map(|d| match d {
        Delta::AddTuple(t) => Some((true, t)),
        Delta::RemoveTuple(t) => Some((false, t)),
        _ => None,
    })
}

/// Output deltas for a single assignment output, netted against its current content.
pub(crate) fn emit(val: &Valuation, out: &str, raw: DeltaSeq) -> SlotDeltas {
    let mut map = SlotDeltas::new();
    map.insert(out.to_string(), normalize_tuples(val.assignment(out), &raw));
    map
}

pub(crate) fn set_of(vars: &[Variable], tuples: impl IntoIterator<Item = Tuple>) -> AssignmentSet {
    AssignmentSet::with_tuples(vars.to_vec(), tuples).expect("operator produced well-kinded tuples")
}

/// Tuples bucketed by a projection; buckets iterate in tuple order.
#[derive(Debug, Clone, Default)]
pub(crate) struct KeyIndex {
    pub map: HashMap<Vec<Value>, BTreeSet<Tuple>>,
}

impl KeyIndex {
    pub fn insert(&mut self, key: Vec<Value>, t: Tuple) {
        self.map.entry(key).or_default().insert(t);
    }

    pub fn remove(&mut self, key: &[Value], t: &Tuple) {
        if let Some(bucket) = self.map.get_mut(key) {
            bucket.remove(t);
            if bucket.is_empty() {
                self.map.remove(key);
            }
        }
    }

    pub fn get(&self, key: &[Value]) -> impl Iterator<Item = &Tuple> {
        self.map.get(key).into_iter().flatten()
    }

    pub fn clear(&mut self) {
        self.map.clear();
    }
}
