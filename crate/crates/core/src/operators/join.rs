use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Content, Delta, Tuple, Variable};
use crate::network::{
    all_outputs, NodeClass, OpError, Operator, Ports, Properties, SlotDeltas, SlotId, SlotTable,
    UpdateInput, Valuation,
};

use super::common::{
    assignment_vars, emit, expect_vars, props, set_of, tuple_changes, KeyIndex,
};

/// Variable layout shared by join and anti-join.
#[derive(Debug, Clone, Default)]
struct Layout {
    left_key: Vec<usize>,
    right_key: Vec<usize>,
    right_extra: Vec<usize>,
    out_vars: Vec<Variable>,
}

fn layout(slots: &SlotTable, left: &str, right: &str, anti: bool) -> Result<Layout, String> {
    let l = assignment_vars(slots, left)?;
    let r = assignment_vars(slots, right)?;
    let mut out = Layout::default();
    for (ri, rv) in r.iter().enumerate() {
        match l.iter().position(|lv| lv.name == rv.name) {
            Some(li) => {
                if l[li].kind != rv.kind {
                    return Err(format!(
                        "variable `{}` is {} on the left and {} on the right",
                        rv.name, l[li].kind, rv.kind
                    ));
                }
                out.left_key.push(li);
                out.right_key.push(ri);
            }
            None => out.right_extra.push(ri),
        }
    }
    out.out_vars = l.clone();
    if !anti {
        out.out_vars
            .extend(out.right_extra.iter().map(|&i| r[i].clone()));
    }
    Ok(out)
}

/// Natural join of two assignment slots, maintained with one hash index per side.
#[derive(Debug, Clone)]
pub struct Join {
    left: SlotId,
    right: SlotId,
    output: SlotId,
    layout: Layout,
    left_index: KeyIndex,
    right_index: KeyIndex,
    probes: u64,
}

impl Join {
    pub fn new(left: &str, right: &str, output: &str) -> Self {
        Join {
            left: left.into(),
            right: right.into(),
            output: output.into(),
            layout: Layout::default(),
            left_index: KeyIndex::default(),
            right_index: KeyIndex::default(),
            probes: 0,
        }
    }

    fn joined(&self, l: &Tuple, r: &Tuple) -> Tuple {
        let mut values = l.values().to_vec();
        values.extend(self.layout.right_extra.iter().map(|&i| r.get(i).clone()));
        Tuple::new(values)
    }
}

impl Operator for Join {
    fn type_name(&self) -> &'static str {
        "join"
    }

    fn class(&self) -> NodeClass {
        NodeClass::Query
    }

    fn ports(&self) -> Ports {
        Ports {
            inputs: vec![self.left.clone(), self.right.clone()],
            outputs: vec![self.output.clone()],
        }
    }

    fn bind(&mut self, slots: &SlotTable) -> Result<(), String> {
        self.layout = layout(slots, &self.left, &self.right, false)?;
        let got = assignment_vars(slots, &self.output)?;
        expect_vars(&self.output, &got, &self.layout.out_vars)
    }

    fn load(&mut self, val: &Valuation) -> Result<(), OpError> {
        self.left_index.clear();
        self.right_index.clear();
        for t in val.assignment(&self.left).tuples() {
            self.left_index
                .insert(t.project(&self.layout.left_key), t.clone());
        }
        for t in val.assignment(&self.right).tuples() {
            self.right_index
                .insert(t.project(&self.layout.right_key), t.clone());
        }
        Ok(())
    }

    fn update(&mut self, input: UpdateInput<'_>) -> Result<SlotDeltas, OpError> {
        let mut raw = Vec::new();
        // Left changes meet the old right side, right changes the new left side.
        for (add, l) in tuple_changes(input.deltas(&self.left)) {
            let key = l.project(&self.layout.left_key);
            self.probes += 2;
            for r in self.right_index.get(&key) {
                let t = self.joined(l, r);
                raw.push(if add { Delta::AddTuple(t) } else { Delta::RemoveTuple(t) });
            }
            if add {
                self.left_index.insert(key, l.clone());
            } else {
                self.left_index.remove(&key, l);
            }
        }
        for (add, r) in tuple_changes(input.deltas(&self.right)) {
            let key = r.project(&self.layout.right_key);
            self.probes += 2;
            for l in self.left_index.get(&key) {
                let t = self.joined(l, r);
                raw.push(if add { Delta::AddTuple(t) } else { Delta::RemoveTuple(t) });
            }
            if add {
                self.right_index.insert(key, r.clone());
            } else {
                self.right_index.remove(&key, r);
            }
        }
        Ok(emit(input.valuation, &self.output, raw))
    }

    fn dir_delta(&self, _changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        all_outputs(&self.ports())
    }

    fn batch(&self, val: &Valuation) -> Result<BTreeMap<SlotId, Content>, OpError> {
        let right = val.assignment(&self.right);
        let mut tuples = Vec::new();
        for l in val.assignment(&self.left).tuples() {
            let key = l.project(&self.layout.left_key);
            for r in right.tuples() {
                if r.project(&self.layout.right_key) == key {
                    tuples.push(self.joined(l, r));
                }
            }
        }
        Ok(BTreeMap::from([(
            self.output.clone(),
            Content::Assignment(set_of(&self.layout.out_vars, tuples)),
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

/// Left tuples without a right partner on the shared variables.
#[derive(Debug, Clone)]
pub struct AntiJoin {
    left: SlotId,
    right: SlotId,
    output: SlotId,
    layout: Layout,
    left_index: KeyIndex,
    right_counts: std::collections::HashMap<Vec<crate::model::Value>, usize>,
    probes: u64,
}

impl AntiJoin {
    pub fn new(left: &str, right: &str, output: &str) -> Self {
        AntiJoin {
            left: left.into(),
            right: right.into(),
            output: output.into(),
            layout: Layout::default(),
            left_index: KeyIndex::default(),
            right_counts: Default::default(),
            probes: 0,
        }
    }
}

impl Operator for AntiJoin {
    fn type_name(&self) -> &'static str {
        "anti_join"
    }

    fn class(&self) -> NodeClass {
        NodeClass::Query
    }

    fn ports(&self) -> Ports {
        Ports {
            inputs: vec![self.left.clone(), self.right.clone()],
            outputs: vec![self.output.clone()],
        }
    }

    fn bind(&mut self, slots: &SlotTable) -> Result<(), String> {
        self.layout = layout(slots, &self.left, &self.right, true)?;
        let got = assignment_vars(slots, &self.output)?;
        expect_vars(&self.output, &got, &self.layout.out_vars)
    }

    fn load(&mut self, val: &Valuation) -> Result<(), OpError> {
        self.left_index.clear();
        self.right_counts.clear();
        for t in val.assignment(&self.left).tuples() {
            self.left_index
                .insert(t.project(&self.layout.left_key), t.clone());
        }
        for t in val.assignment(&self.right).tuples() {
            *self
                .right_counts
                .entry(t.project(&self.layout.right_key))
                .or_default() += 1;
        }
        Ok(())
    }

    fn update(&mut self, input: UpdateInput<'_>) -> Result<SlotDeltas, OpError> {
        let mut raw = Vec::new();
        for (add, l) in tuple_changes(input.deltas(&self.left)) {
            let key = l.project(&self.layout.left_key);
            self.probes += 2;
            if self.right_counts.get(&key).copied().unwrap_or(0) == 0 {
                raw.push(if add {
                    Delta::AddTuple(l.clone())
                } else {
                    Delta::RemoveTuple(l.clone())
                });
            }
            if add {
                self.left_index.insert(key, l.clone());
            } else {
                self.left_index.remove(&key, l);
            }
        }
        for (add, r) in tuple_changes(input.deltas(&self.right)) {
            let key = r.project(&self.layout.right_key);
            self.probes += 2;
            let count = self.right_counts.entry(key.clone()).or_default();
            let before = *count;
            if add {
                *count += 1;
            } else {
                *count -= 1;
            }
            let after = *count;
            if after == 0 {
                self.right_counts.remove(&key);
            }
            if (before == 0) != (after == 0) {
                for l in self.left_index.get(&key) {
                    raw.push(if after == 0 {
                        Delta::AddTuple(l.clone())
                    } else {
                        Delta::RemoveTuple(l.clone())
                    });
                }
            }
        }
        Ok(emit(input.valuation, &self.output, raw))
    }

    fn dir_delta(&self, _changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        all_outputs(&self.ports())
    }

    fn batch(&self, val: &Valuation) -> Result<BTreeMap<SlotId, Content>, OpError> {
        let right = val.assignment(&self.right);
        let tuples = val.assignment(&self.left).tuples().filter(|l| {
            let key = l.project(&self.layout.left_key);
            !right
                .tuples()
                .any(|r| r.project(&self.layout.right_key) == key)
        });
        Ok(BTreeMap::from([(
            self.output.clone(),
            Content::Assignment(set_of(&self.layout.out_vars, tuples.cloned())),
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
