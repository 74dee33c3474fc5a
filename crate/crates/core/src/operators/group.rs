use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::model::{Content, Delta, Tuple, Value, ValueKind, Variable};
use crate::network::{
    all_outputs, NodeClass, OpError, Operator, Ports, Properties, SlotDeltas, SlotId, SlotTable,
    UpdateInput, Valuation,
};

use super::common::{assignment_vars, emit, expect_vars, positions, props, set_of, tuple_changes};
use super::expr::{self, Compiled, Scope, Ty};
use super::numeric::Sum;

/// Group variables plus one result variable, checked against the output slot.
fn group_layout(
    slots: &SlotTable,
    input: &str,
    output: &str,
    by: &[String],
    result_kind: Option<ValueKind>,
) -> Result<(Vec<Variable>, Vec<usize>, Vec<Variable>), String> {
    let in_vars = assignment_vars(slots, input)?;
    let key = positions(&in_vars, by)?;
    let out_vars = assignment_vars(slots, output)?;
    let Some((result, groups)) = out_vars.split_last() else {
        return Err(format!("slot `{output}` needs a result variable"));
    };
    let want: Vec<Variable> = key.iter().map(|&i| in_vars[i].clone()).collect();
    expect_vars(output, groups, &want)?;
    if let Some(kind) = result_kind {
        if result.kind != kind {
            return Err(format!(
                "result variable `{}` must be {kind}, found {}",
                result.name, result.kind
            ));
        }
    }
    Ok((in_vars, key, out_vars))
}

fn with_value(key: &[Value], v: Value) -> Tuple {
    let mut values = key.to_vec();
    values.push(v);
    Tuple::new(values)
}

/// Emits remove(old) then add(new) for every touched key whose value changed.
fn emit_changes(
    touched: Vec<(Vec<Value>, Option<Value>)>,
    current: impl Fn(&[Value]) -> Option<Value>,
) -> Vec<Delta> {
    let mut raw = Vec::new();
    for (key, old) in touched {
        let new = current(&key);
        if old == new {
            continue;
        }
        if let Some(old) = old {
            raw.push(Delta::RemoveTuple(with_value(&key, old)));
        }
        if let Some(new) = new {
            raw.push(Delta::AddTuple(with_value(&key, new)));
        }
    }
    raw
}

/// Number of input tuples per group.
#[derive(Debug, Clone)]
pub struct GroupCount {
    input: SlotId,
    output: SlotId,
    by: Vec<String>,
    key: Vec<usize>,
    out_vars: Vec<Variable>,
    counts: HashMap<Vec<Value>, i64>,
    probes: u64,
}

impl GroupCount {
    pub fn new(input: &str, output: &str, by: &[&str]) -> Self {
        GroupCount {
            input: input.into(),
            output: output.into(),
            by: by.iter().map(|s| s.to_string()).collect(),
            key: Vec::new(),
            out_vars: Vec::new(),
            counts: HashMap::new(),
            probes: 0,
        }
    }
}

impl Operator for GroupCount {
    fn type_name(&self) -> &'static str {
        "group_count"
    }

    fn class(&self) -> NodeClass {
        NodeClass::Query
    }

    fn ports(&self) -> Ports {
        Ports {
            inputs: vec![self.input.clone()],
            outputs: vec![self.output.clone()],
        }
    }

    fn bind(&mut self, slots: &SlotTable) -> Result<(), String> {
        let (_, key, out) =
            group_layout(slots, &self.input, &self.output, &self.by, Some(ValueKind::Int))?;
        self.key = key;
        self.out_vars = out;
        Ok(())
    }

    fn load(&mut self, val: &Valuation) -> Result<(), OpError> {
        self.counts.clear();
        for t in val.assignment(&self.input).tuples() {
            *self.counts.entry(t.project(&self.key)).or_default() += 1;
        }
        Ok(())
    }

    fn update(&mut self, input: UpdateInput<'_>) -> Result<SlotDeltas, OpError> {
        let mut touched: Vec<(Vec<Value>, Option<Value>)> = Vec::new();
        let mut seen: HashMap<Vec<Value>, ()> = HashMap::new();
        for (add, t) in tuple_changes(input.deltas(&self.input)) {
            self.probes += 1;
            let key = t.project(&self.key);
            let count = self.counts.entry(key.clone()).or_default();
            if seen.insert(key.clone(), ()).is_none() {
                touched.push((key.clone(), (*count > 0).then_some(Value::Int(*count))));
            }
            *count += if add { 1 } else { -1 };
            if *count == 0 {
                self.counts.remove(&key);
            }
        }
        let raw = emit_changes(touched, |k| self.counts.get(k).map(|c| Value::Int(*c)));
        Ok(emit(input.valuation, &self.output, raw))
    }

    fn dir_delta(&self, _changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        all_outputs(&self.ports())
    }

    fn batch(&self, val: &Valuation) -> Result<BTreeMap<SlotId, Content>, OpError> {
        let mut counts: BTreeMap<Vec<Value>, i64> = BTreeMap::new();
        for t in val.assignment(&self.input).tuples() {
            *counts.entry(t.project(&self.key)).or_default() += 1;
        }
        let tuples = counts.into_iter().map(|(k, c)| with_value(&k, Value::Int(c)));
        Ok(BTreeMap::from([(
            self.output.clone(),
            Content::Assignment(set_of(&self.out_vars, tuples)),
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

/// Sum of one numeric variable per group; float sums are exact before rounding.
#[derive(Debug, Clone)]
pub struct GroupSum {
    input: SlotId,
    output: SlotId,
    by: Vec<String>,
    of: String,
    key: Vec<usize>,
    value_pos: usize,
    float: bool,
    out_vars: Vec<Variable>,
    groups: HashMap<Vec<Value>, (usize, Sum)>,
    probes: u64,
}

impl GroupSum {
    pub fn new(input: &str, output: &str, by: &[&str], of: &str) -> Self {
        GroupSum {
            input: input.into(),
            output: output.into(),
            by: by.iter().map(|s| s.to_string()).collect(),
            of: of.into(),
            key: Vec::new(),
            value_pos: 0,
            float: false,
            out_vars: Vec::new(),
            groups: HashMap::new(),
            probes: 0,
        }
    }

    fn value_of(&self, key: &[Value]) -> Result<Option<Value>, OpError> {
        match self.groups.get(key) {
            None => Ok(None),
            Some((_, sum)) => sum
                .value()
                .map(Some)
                .ok_or_else(|| OpError::Eval("integer overflow in sum".into())),
        }
    }
}

impl Operator for GroupSum {
    fn type_name(&self) -> &'static str {
        "group_sum"
    }

    fn class(&self) -> NodeClass {
        NodeClass::Query
    }

    fn ports(&self) -> Ports {
        Ports {
            inputs: vec![self.input.clone()],
            outputs: vec![self.output.clone()],
        }
    }

    fn bind(&mut self, slots: &SlotTable) -> Result<(), String> {
        let in_vars = assignment_vars(slots, &self.input)?;
        let pos = positions(&in_vars, std::slice::from_ref(&self.of))?[0];
        let kind = in_vars[pos].kind;
        if !kind.is_numeric() {
            return Err(format!("cannot sum non-numeric variable `{}` ({kind})", self.of));
        }
        let (_, key, out) = group_layout(slots, &self.input, &self.output, &self.by, Some(kind))?;
        self.key = key;
        self.value_pos = pos;
        self.float = kind == ValueKind::Float;
        self.out_vars = out;
        Ok(())
    }

    fn load(&mut self, val: &Valuation) -> Result<(), OpError> {
        self.groups.clear();
        for t in val.assignment(&self.input).tuples() {
            let g = self
                .groups
                .entry(t.project(&self.key))
                .or_insert_with(|| (0, Sum::for_float(self.float)));
            g.0 += 1;
            g.1.add(t.get(self.value_pos));
        }
        Ok(())
    }

    fn update(&mut self, input: UpdateInput<'_>) -> Result<SlotDeltas, OpError> {
        let mut touched: Vec<(Vec<Value>, Option<Value>)> = Vec::new();
        let mut seen: HashMap<Vec<Value>, ()> = HashMap::new();
        for (add, t) in tuple_changes(input.deltas(&self.input)) {
            self.probes += 1;
            let key = t.project(&self.key);
            if seen.insert(key.clone(), ()).is_none() {
                let old = self.value_of(&key)?;
                touched.push((key.clone(), old));
            }
            let float = self.float;
            let g = self
                .groups
                .entry(key.clone())
                .or_insert_with(|| (0, Sum::for_float(float)));
            if add {
                g.0 += 1;
                g.1.add(t.get(self.value_pos));
            } else {
                g.0 -= 1;
                g.1.remove(t.get(self.value_pos));
            }
            if g.0 == 0 {
                self.groups.remove(&key);
            }
        }
        let mut current = HashMap::new();
        for (key, _) in &touched {
            current.insert(key.clone(), self.value_of(key)?);
        }
        let raw = emit_changes(touched, |k| current[k].clone());
        Ok(emit(input.valuation, &self.output, raw))
    }

    fn dir_delta(&self, _changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        all_outputs(&self.ports())
    }

    fn batch(&self, val: &Valuation) -> Result<BTreeMap<SlotId, Content>, OpError> {
        let mut groups: BTreeMap<Vec<Value>, Sum> = BTreeMap::new();
        for t in val.assignment(&self.input).tuples() {
            groups
                .entry(t.project(&self.key))
                .or_insert_with(|| Sum::for_float(self.float))
                .add(t.get(self.value_pos));
        }
        let mut tuples = Vec::new();
        for (k, s) in groups {
            let v = s
                .value()
                .ok_or_else(|| OpError::Eval("integer overflow in sum".into()))?;
            tuples.push(with_value(&k, v));
        }
        Ok(BTreeMap::from([(
            self.output.clone(),
            Content::Assignment(set_of(&self.out_vars, tuples)),
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

/// Collection-valued expression per group, recomputed for touched groups.
#[derive(Debug, Clone)]
pub struct GroupExpr {
    input: SlotId,
    output: SlotId,
    by: Vec<String>,
    source: String,
    compiled: Option<Compiled>,
    key: Vec<usize>,
    result_kind: ValueKind,
    out_vars: Vec<Variable>,
    groups: HashMap<Vec<Value>, BTreeSet<Tuple>>,
    probes: u64,
}

impl GroupExpr {
    pub fn new(input: &str, output: &str, by: &[&str], expr: &str) -> Self {
        GroupExpr {
            input: input.into(),
            output: output.into(),
            by: by.iter().map(|s| s.to_string()).collect(),
            source: expr.into(),
            compiled: None,
            key: Vec::new(),
            result_kind: ValueKind::Int,
            out_vars: Vec::new(),
            groups: HashMap::new(),
            probes: 0,
        }
    }

    fn eval(&self, key: &[Value], members: &BTreeSet<Tuple>) -> Result<Value, OpError> {
        let c = self.compiled.as_ref().expect("bound before use");
        c.eval_group(key, members.iter().map(Tuple::values))
            .and_then(|v| expr::coerce(v, self.result_kind))
            .map_err(|e| OpError::Eval(format!("{}: {e}", self.source)))
    }
}

impl Operator for GroupExpr {
    fn type_name(&self) -> &'static str {
        "group_expr"
    }

    fn class(&self) -> NodeClass {
        NodeClass::Query
    }

    fn ports(&self) -> Ports {
        Ports {
            inputs: vec![self.input.clone()],
            outputs: vec![self.output.clone()],
        }
    }

    fn bind(&mut self, slots: &SlotTable) -> Result<(), String> {
        let (in_vars, key, out) = group_layout(slots, &self.input, &self.output, &self.by, None)?;
        let inner: Vec<(String, Ty)> = in_vars
            .iter()
            .map(|v| (v.name.clone(), Ty::Known(v.kind)))
            .collect();
        let outer: Vec<(String, Ty)> = key.iter().map(|&i| inner[i].clone()).collect();
        let parsed = expr::parse(&self.source)?;
        let compiled = expr::compile(
            &parsed,
            &Scope {
                outer: &outer,
                inner: Some(&inner),
            },
        )?;
        let result = out.last().expect("checked by layout");
        if !expr::assignable(compiled.ty(), result.kind) {
            return Err(format!(
                "expression type {} does not fit `{}` ({})",
                compiled.ty(),
                result.name,
                result.kind
            ));
        }
        self.result_kind = result.kind;
        self.compiled = Some(compiled);
        self.key = key;
        self.out_vars = out;
        Ok(())
    }

    fn load(&mut self, val: &Valuation) -> Result<(), OpError> {
        self.groups.clear();
        for t in val.assignment(&self.input).tuples() {
            self.groups
                .entry(t.project(&self.key))
                .or_default()
                .insert(t.clone());
        }
        Ok(())
    }

    fn update(&mut self, input: UpdateInput<'_>) -> Result<SlotDeltas, OpError> {
        let mut touched: Vec<(Vec<Value>, Option<Value>)> = Vec::new();
        let mut seen: HashMap<Vec<Value>, ()> = HashMap::new();
        // Old values are recomputed from the pre-delta groups.
        for (_, t) in tuple_changes(input.deltas(&self.input)) {
            let key = t.project(&self.key);
            if seen.insert(key.clone(), ()).is_none() {
                let old = match self.groups.get(&key) {
                    Some(m) => Some(self.eval(&key, m)?),
                    None => None,
                };
                touched.push((key, old));
            }
        }
        for (add, t) in tuple_changes(input.deltas(&self.input)) {
            self.probes += 1;
            let key = t.project(&self.key);
            let members = self.groups.entry(key.clone()).or_default();
            if add {
                members.insert(t.clone());
            } else {
                members.remove(t);
            }
            if members.is_empty() {
                self.groups.remove(&key);
            }
        }
        let mut current = HashMap::new();
        for (key, _) in &touched {
            let v = match self.groups.get(key) {
                Some(m) => Some(self.eval(key, m)?),
                None => None,
            };
            current.insert(key.clone(), v);
        }
        let raw = emit_changes(touched, |k| current[k].clone());
        Ok(emit(input.valuation, &self.output, raw))
    }

    fn dir_delta(&self, _changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        all_outputs(&self.ports())
    }

    fn batch(&self, val: &Valuation) -> Result<BTreeMap<SlotId, Content>, OpError> {
        let mut groups: BTreeMap<Vec<Value>, BTreeSet<Tuple>> = BTreeMap::new();
        for t in val.assignment(&self.input).tuples() {
            groups
                .entry(t.project(&self.key))
                .or_default()
                .insert(t.clone());
        }
        let mut tuples = Vec::new();
        for (k, members) in &groups {
            tuples.push(with_value(k, self.eval(k, members)?));
        }
        Ok(BTreeMap::from([(
            self.output.clone(),
            Content::Assignment(set_of(&self.out_vars, tuples)),
        )]))
    }

    fn properties(&self) -> Properties {
        props(false)
    }

    fn probes(&self) -> u64 {
        self.probes
    }

    fn box_clone(&self) -> Box<dyn Operator> {
        Box::new(self.clone())
    }
}

/// Per-tuple expression: output tuples are input tuples extended by the result.
#[derive(Debug, Clone)]
pub struct Expression {
    input: SlotId,
    output: SlotId,
    source: String,
    compiled: Option<Compiled>,
    result_kind: ValueKind,
    out_vars: Vec<Variable>,
    probes: u64,
}

impl Expression {
    pub fn new(input: &str, output: &str, expr: &str) -> Self {
        Expression {
            input: input.into(),
            output: output.into(),
            source: expr.into(),
            compiled: None,
            result_kind: ValueKind::Int,
            out_vars: Vec::new(),
            probes: 0,
        }
    }

    fn extend(&self, t: &Tuple) -> Result<Tuple, OpError> {
        let c = self.compiled.as_ref().expect("bound before use");
        let v = c
            .eval(t.values())
            .and_then(|v| expr::coerce(v, self.result_kind))
            .map_err(|e| OpError::Eval(format!("{}: {e}", self.source)))?;
        Ok(with_value(t.values(), v))
    }
}

impl Operator for Expression {
    fn type_name(&self) -> &'static str {
        "expr"
    }

    fn class(&self) -> NodeClass {
        NodeClass::Query
    }

    fn ports(&self) -> Ports {
        Ports {
            inputs: vec![self.input.clone()],
            outputs: vec![self.output.clone()],
        }
    }

    fn bind(&mut self, slots: &SlotTable) -> Result<(), String> {
        let in_vars = assignment_vars(slots, &self.input)?;
        let out = assignment_vars(slots, &self.output)?;
        let Some((result, prefix)) = out.split_last() else {
            return Err(format!("slot `{}` needs a result variable", self.output));
        };
        expect_vars(&self.output, prefix, &in_vars)?;
        let scope: Vec<(String, Ty)> = in_vars
            .iter()
            .map(|v| (v.name.clone(), Ty::Known(v.kind)))
            .collect();
        let compiled = expr::compile(
            &expr::parse(&self.source)?,
            &Scope {
                outer: &scope,
                inner: None,
            },
        )?;
        if !expr::assignable(compiled.ty(), result.kind) {
            return Err(format!(
                "expression type {} does not fit `{}` ({})",
                compiled.ty(),
                result.name,
                result.kind
            ));
        }
        self.result_kind = result.kind;
        self.compiled = Some(compiled);
        self.out_vars = out;
        Ok(())
    }

    fn load(&mut self, _val: &Valuation) -> Result<(), OpError> {
        Ok(())
    }

    fn update(&mut self, input: UpdateInput<'_>) -> Result<SlotDeltas, OpError> {
        let mut raw = Vec::new();
        for (add, t) in tuple_changes(input.deltas(&self.input)) {
            self.probes += 1;
            let out = self.extend(t)?;
            raw.push(if add {
                Delta::AddTuple(out)
            } else {
                Delta::RemoveTuple(out)
            });
        }
        Ok(emit(input.valuation, &self.output, raw))
    }

    fn dir_delta(&self, _changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        all_outputs(&self.ports())
    }

    fn batch(&self, val: &Valuation) -> Result<BTreeMap<SlotId, Content>, OpError> {
        let tuples = val
            .assignment(&self.input)
            .tuples()
            .map(|t| self.extend(t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BTreeMap::from([(
            self.output.clone(),
            Content::Assignment(set_of(&self.out_vars, tuples)),
        )]))
    }

    fn properties(&self) -> Properties {
        props(false)
    }

    fn probes(&self) -> u64 {
        self.probes
    }

    fn box_clone(&self) -> Box<dyn Operator> {
        Box::new(self.clone())
    }
}
