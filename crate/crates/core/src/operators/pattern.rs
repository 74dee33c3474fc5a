//! Graph pattern matching with anchored re-evaluation.
//!
//! Text syntax, statements separated by `;` or newlines:
//!
//! ```text
//! p:Package -contains-> t:Type     # declares p and t, constrains an edge
//! t -methods-> m:Method            # later references omit the type
//! where m != t                     # predicate (expression DSL)
//! +other_slot                      # some tuple of other_slot agrees on shared vars
//! !other_slot                      # no tuple of other_slot agrees on shared vars
//! cross                            # permit disconnected variable graphs
//! ```
//!
//! Matching is injective: distinct variables bind distinct vertices. In
//! predicates a variable denotes its vertex payload, or the vertex id as a
//! string when the vertex carries none.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::model::{
    Content, Delta, Endpoint, Tuple, TypedGraph, Value, ValueKind, Variable, Vertex,
};
use crate::network::{
    all_outputs, NodeClass, OpError, Operator, Ports, Properties, SlotDeltas, SlotId, SlotTable,
    UpdateInput, Valuation,
};

use super::common::{assignment_vars, emit, expect_vars, model_slot, props, set_of, tuple_changes};
use super::expr::{self, Compiled, Scope, Ty};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternEdge {
    pub src: String,
    pub ty: String,
    pub tgt: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dependency {
    pub slot: SlotId,
    pub positive: bool,
}

/// Declarative pattern: typed vertex variables, edge constraints,
/// predicates, and dependencies on other assignment slots.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PatternSpec {
    pub vars: Vec<(String, String)>,
    pub edges: Vec<PatternEdge>,
    pub predicates: Vec<String>,
    pub deps: Vec<Dependency>,
    pub cross: bool,
}

impl PatternSpec {
    pub fn parse(text: &str) -> Result<PatternSpec, String> {
        let mut spec = PatternSpec::default();
        for stmt in text.split([';', '\n']).map(str::trim).filter(|s| !s.is_empty()) {
            if let Some(rest) = stmt.strip_prefix("where ") {
                expr::parse(rest)?;
                spec.predicates.push(rest.trim().to_string());
            } else if stmt == "cross" {
                spec.cross = true;
            } else if let Some(slot) = stmt.strip_prefix('+') {
                spec.deps.push(Dependency {
                    slot: slot.trim().to_string(),
                    positive: true,
                });
            } else if let Some(slot) = stmt.strip_prefix('!') {
                spec.deps.push(Dependency {
                    slot: slot.trim().to_string(),
                    positive: false,
                });
            } else {
                spec.parse_path(stmt)?;
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    fn parse_path(&mut self, stmt: &str) -> Result<(), String> {
        let mut rest = stmt.trim();
        // Source variable and type of the edge awaiting its target.
        let mut open: Option<(String, String)> = None;
        loop {
            let end = rest.find('-').unwrap_or(rest.len());
            let name = self.declare(rest[..end].trim())?;
            if let Some((src, ty)) = open.take() {
                self.edges.push(PatternEdge {
                    src,
                    ty,
                    tgt: name.clone(),
                });
            }
            rest = &rest[end..];
            if rest.is_empty() {
                return Ok(());
            }
            let arrow = &rest[1..];
            let close = arrow
                .find("->")
                .ok_or_else(|| format!("unterminated edge in `{stmt}`"))?;
            let ty = arrow[..close].trim();
            if !is_word(ty) {
                return Err(format!("bad edge type `{ty}` in `{stmt}`"));
            }
            open = Some((name, ty.to_string()));
            rest = arrow[close + 2..].trim_start();
        }
    }

    fn declare(&mut self, term: &str) -> Result<String, String> {
        let (name, ty) = match term.split_once(':') {
            Some((n, t)) => (n.trim(), Some(t.trim())),
            None => (term, None),
        };
        if !is_word(name) {
            return Err(format!("bad variable name `{name}`"));
        }
        if ty.is_some_and(|t| !is_word(t)) {
            return Err(format!("bad vertex type in `{term}`"));
        }
        match (self.vars.iter().find(|(n, _)| n == name), ty) {
            (Some((_, old)), Some(t)) if old != t => {
                Err(format!("variable `{name}` redeclared as `{t}` (was `{old}`)"))
            }
            (Some(_), _) => Ok(name.to_string()),
            (None, Some(t)) => {
                self.vars.push((name.to_string(), t.to_string()));
                Ok(name.to_string())
            }
            (None, None) => Err(format!("variable `{name}` used before its type is given")),
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.vars.is_empty() {
            return Err("pattern declares no variables".into());
        }
        if !self.cross && components(self).len() > 1 {
            return Err("pattern is disconnected; add `cross` to allow a cross product".into());
        }
        Ok(())
    }

    fn var_index(&self, name: &str) -> usize {
        self.vars.iter().position(|(n, _)| n == name).expect("declared")
    }
}

fn is_word(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with(|c: char| c.is_ascii_digit())
        && s.chars().all(|c| c.is_alphanumeric() || c == '_')
}

impl fmt::Display for PatternSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut declared = BTreeSet::new();
        let term = |name: &str, declared: &mut BTreeSet<String>| {
            if declared.insert(name.to_string()) {
                let ty = &self.vars[self.var_index(name)].1;
                format!("{name}:{ty}")
            } else {
                name.to_string()
            }
        };
        let mut parts = Vec::new();
        for e in &self.edges {
            let s = term(&e.src, &mut declared);
            let t = term(&e.tgt, &mut declared);
            parts.push(format!("{s} -{}-> {t}", e.ty));
        }
        for (name, _) in &self.vars {
            if !declared.contains(name) {
                parts.push(term(name, &mut declared));
            }
        }
        for p in &self.predicates {
            parts.push(format!("where {p}"));
        }
        for d in &self.deps {
            parts.push(format!("{}{}", if d.positive { '+' } else { '!' }, d.slot));
        }
        if self.cross {
            parts.push("cross".into());
        }
        f.write_str(&parts.join("; "))
    }
}

/// Connected components of the variable graph, as variable indices.
fn components(spec: &PatternSpec) -> Vec<Vec<usize>> {
    let n = spec.vars.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            comp.push(v);
            for e in &spec.edges {
                let (a, b) = (spec.var_index(&e.src), spec.var_index(&e.tgt));
                for (x, y) in [(a, b), (b, a)] {
                    if x == v && !seen[y] {
                        seen[y] = true;
                        queue.push_back(y);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

/// How the search reaches a variable.
#[derive(Debug, Clone, Copy)]
enum Step {
    /// Scan all vertices of the variable's type.
    Scan(usize),
    /// Follow edge constraint `edge` from a bound variable; `forward` when the
    /// bound variable is the constraint's source.
    Follow { var: usize, edge: usize, forward: bool },
}

#[derive(Debug, Clone)]
struct DepBinding {
    slot: SlotId,
    positive: bool,
    /// Pattern-variable positions of shared variables.
    pattern_pos: Vec<usize>,
    /// Dependency-slot positions of the same variables.
    slot_pos: Vec<usize>,
}

/// Finds pattern matches in a model, re-evaluating only around changed elements.
#[derive(Debug, Clone)]
pub struct PatternMatch {
    input: SlotId,
    output: SlotId,
    spec: PatternSpec,
    /// `edges` with variable indices resolved: (src, type, tgt).
    edges: Vec<(usize, String, usize)>,
    /// Search plan per anchor variable.
    plans: Vec<Vec<Step>>,
    predicates: Vec<Compiled>,
    deps: Vec<DepBinding>,
    out_vars: Vec<Variable>,
    structural: BTreeSet<Tuple>,
    by_vertex: HashMap<String, BTreeSet<Tuple>>,
    dep_counts: Vec<HashMap<Vec<Value>, usize>>,
    by_dep_key: Vec<HashMap<Vec<Value>, BTreeSet<Tuple>>>,
    probes: u64,
}

impl PatternMatch {
    pub fn new(input: &str, output: &str, spec: PatternSpec) -> Self {
        let edges = spec
            .edges
            .iter()
            .map(|e| (spec.var_index(&e.src), e.ty.clone(), spec.var_index(&e.tgt)))
            .collect();
        let plans = (0..spec.vars.len()).map(|s| plan(&spec, s)).collect();
        PatternMatch {
            input: input.into(),
            output: output.into(),
            spec,
            edges,
            plans,
            predicates: Vec::new(),
            deps: Vec::new(),
            out_vars: Vec::new(),
            structural: BTreeSet::new(),
            by_vertex: HashMap::new(),
            dep_counts: Vec::new(),
            by_dep_key: Vec::new(),
            probes: 0,
        }
    }

    pub fn parse(input: &str, output: &str, text: &str) -> Result<Self, String> {
        Ok(PatternMatch::new(input, output, PatternSpec::parse(text)?))
    }

    pub fn spec(&self) -> &PatternSpec {
        &self.spec
    }

    fn var_type(&self, i: usize) -> &str {
        &self.spec.vars[i].1
    }

    fn has_edge(&self, g: &TypedGraph, src: &str, ty: &str, tgt: &str) -> bool {
        g.connected(&Endpoint::local(src), ty, &Endpoint::local(tgt))
    }

    /// All structural matches binding `start` to `anchor` (or every vertex of
    /// its type when `anchor` is `None`).
    fn enumerate(
        &mut self,
        g: &TypedGraph,
        start: usize,
        anchor: Option<&Vertex>,
    ) -> Result<Vec<Tuple>, OpError> {
        let roots: Vec<&Vertex> = match anchor {
            Some(v) => g.vertex(&v.id).into_iter().collect(),
            None => g.vertices_of_type(self.var_type(start)).collect(),
        };
        let mut out = Vec::new();
        for root in roots {
            out.extend(self.enumerate_seeded(g, &[(start, &root.id)])?);
        }
        Ok(out)
    }

    /// All structural matches extending the fixed `(variable, vertex id)` pairs.
    fn enumerate_seeded(&mut self, g: &TypedGraph, fixed: &[(usize, &str)]) -> Result<Vec<Tuple>, OpError> {
        let mut out = Vec::new();
        let mut binding: Vec<Option<&Vertex>> = vec![None; self.spec.vars.len()];
        for &(var, id) in fixed {
            let Some(v) = g.vertex(id) else { return Ok(out) };
            if v.ty != self.var_type(var) {
                return Ok(out);
            }
            match binding[var] {
                Some(b) if b.id != v.id => return Ok(out),
                Some(_) => {}
                None if binding.iter().flatten().any(|b| b.id == v.id) => return Ok(out),
                None => binding[var] = Some(v),
            }
        }
        for &(var, _) in fixed {
            if !self.consistent(g, &binding, var) {
                return Ok(out);
            }
        }
        let plan = self.plans[fixed[0].0].clone();
        self.extend(g, &plan, 0, &mut binding, &mut out)?;
        Ok(out)
    }

    /// A previously found match still holds in `g`.
    fn holds(&self, g: &TypedGraph, m: &Tuple) -> Result<bool, OpError> {
        let mut binding = Vec::with_capacity(m.len());
        for (i, value) in m.values().iter().enumerate() {
            let Value::Vertex(id) = value else { return Ok(false) };
            match g.vertex(id) {
                Some(v) if v.ty == self.var_type(i) => binding.push(Some(v)),
                _ => return Ok(false),
            }
        }
        let edges_hold = self.edges.iter().all(|(s, ty, t)| {
            self.has_edge(g, &binding[*s].expect("bound").id, ty, &binding[*t].expect("bound").id)
        });
        Ok(edges_hold && self.predicates_hold(&binding)?)
    }

    fn extend<'g>(
        &mut self,
        g: &'g TypedGraph,
        plan: &[Step],
        depth: usize,
        binding: &mut Vec<Option<&'g Vertex>>,
        out: &mut Vec<Tuple>,
    ) -> Result<(), OpError> {
        let Some(step) = plan.get(depth) else {
            if self.predicates_hold(binding)? {
                out.push(Tuple::new(
                    binding
                        .iter()
                        .map(|v| Value::Vertex(v.expect("fully bound").id.clone()))
                        .collect(),
                ));
            }
            return Ok(());
        };
        let var = match *step {
            Step::Scan(var) | Step::Follow { var, .. } => var,
        };
        if binding[var].is_some() {
            return self.extend(g, plan, depth + 1, binding, out);
        }
        let (var, candidates): (usize, BTreeSet<&'g str>) = match *step {
            Step::Scan(var) => (
                var,
                g.vertices_of_type(self.var_type(var))
                    .map(|v| v.id.as_str())
                    .collect(),
            ),
            Step::Follow { var, edge, forward } => {
                let (s, ty, t) = &self.edges[edge];
                let bound_var = if forward { *s } else { *t };
                let from = Endpoint::local(binding[bound_var].expect("bound").id.clone());
                let ids = if forward {
                    g.out_edges(&from)
                        .filter(|e| &e.ty == ty)
                        .filter_map(|e| e.tgt.as_local())
                        .collect()
                } else {
                    g.in_edges(&from)
                        .filter(|e| &e.ty == ty)
                        .filter_map(|e| e.src.as_local())
                        .collect()
                };
                (var, ids)
            }
        };
        for id in candidates {
            self.probes += 1;
            let Some(v) = g.vertex(id) else { continue };
            if v.ty != self.var_type(var) {
                continue;
            }
            if binding.iter().flatten().any(|b| b.id == v.id) {
                continue;
            }
            binding[var] = Some(v);
            if self.consistent(g, binding, var) {
                self.extend(g, plan, depth + 1, binding, out)?;
            }
            binding[var] = None;
        }
        Ok(())
    }

    /// Edge constraints between `var` and already-bound variables hold.
    fn consistent(&self, g: &TypedGraph, binding: &[Option<&Vertex>], var: usize) -> bool {
        self.edges.iter().all(|(s, ty, t)| {
            if *s != var && *t != var {
                return true;
            }
            match (binding[*s], binding[*t]) {
                (Some(a), Some(b)) => self.has_edge(g, &a.id, ty, &b.id),
                _ => true,
            }
        })
    }

    fn predicates_hold(&self, binding: &[Option<&Vertex>]) -> Result<bool, OpError> {
        if self.predicates.is_empty() {
            return Ok(true);
        }
        let values: Vec<Value> = binding
            .iter()
            .map(|v| {
                let v = v.expect("fully bound");
                v.payload.clone().unwrap_or_else(|| Value::String(v.id.clone()))
            })
            .collect();
        for (p, src) in self.predicates.iter().zip(&self.spec.predicates) {
            match p.eval(&values) {
                Ok(Value::Bool(true)) => {}
                Ok(Value::Bool(false)) => return Ok(false),
                Ok(other) => {
                    return Err(OpError::Eval(format!(
                        "predicate `{src}` yielded {}",
                        other.kind()
                    )))
                }
                Err(e) => return Err(OpError::Eval(format!("predicate `{src}`: {e}"))),
            }
        }
        Ok(true)
    }

    fn all_matches(&mut self, g: &TypedGraph) -> Result<Vec<Tuple>, OpError> {
        self.enumerate(g, 0, None)
    }

    fn deps_hold(&self, m: &Tuple, counts: impl Fn(usize, &[Value]) -> usize) -> bool {
        self.deps.iter().enumerate().all(|(i, d)| {
            let key = m.project(&d.pattern_pos);
            (counts(i, &key) > 0) == d.positive
        })
    }

    fn index(&mut self, m: &Tuple) {
        for v in m.values() {
            if let Value::Vertex(id) = v {
                self.by_vertex.entry(id.clone()).or_default().insert(m.clone());
            }
        }
        for (i, d) in self.deps.iter().enumerate() {
            self.by_dep_key[i]
                .entry(m.project(&d.pattern_pos))
                .or_default()
                .insert(m.clone());
        }
        self.structural.insert(m.clone());
    }

    fn unindex(&mut self, m: &Tuple) {
        for v in m.values() {
            if let Value::Vertex(id) = v {
                if let Some(set) = self.by_vertex.get_mut(id) {
                    set.remove(m);
                    if set.is_empty() {
                        self.by_vertex.remove(id);
                    }
                }
            }
        }
        for (i, d) in self.deps.iter().enumerate() {
            let key = m.project(&d.pattern_pos);
            if let Some(set) = self.by_dep_key[i].get_mut(&key) {
                set.remove(m);
                if set.is_empty() {
                    self.by_dep_key[i].remove(&key);
                }
            }
        }
        self.structural.remove(m);
    }

    fn relevant_vertex_type(&self, ty: &str) -> bool {
        self.spec.vars.iter().any(|(_, t)| t == ty)
    }

    fn relevant_edge_type(&self, ty: &str) -> bool {
        self.edges.iter().any(|(_, t, _)| t == ty)
    }
}

/// BFS order over the variable graph from `start`; unreachable components
/// are entered by scanning.
fn plan(spec: &PatternSpec, start: usize) -> Vec<Step> {
    let n = spec.vars.len();
    let mut bound = vec![false; n];
    bound[start] = true;
    let mut steps = Vec::new();
    let mut queue = VecDeque::from([start]);
    loop {
        while let Some(v) = queue.pop_front() {
            for (k, e) in spec.edges.iter().enumerate() {
                let (s, t) = (spec.var_index(&e.src), spec.var_index(&e.tgt));
                let next = if s == v && !bound[t] {
                    Some((t, true))
                } else if t == v && !bound[s] {
                    Some((s, false))
                } else {
                    None
                };
                if let Some((var, forward)) = next {
                    bound[var] = true;
                    steps.push(Step::Follow {
                        var,
                        edge: k,
                        forward,
                    });
                    queue.push_back(var);
                }
            }
        }
        match (0..n).find(|&i| !bound[i]) {
            Some(i) => {
                bound[i] = true;
                steps.push(Step::Scan(i));
                queue.push_back(i);
            }
            None => return steps,
        }
    }
}

impl Operator for PatternMatch {
    fn type_name(&self) -> &'static str {
        "pattern"
    }

    fn class(&self) -> NodeClass {
        NodeClass::Query
    }

    fn ports(&self) -> Ports {
        let mut inputs = vec![self.input.clone()];
        inputs.extend(self.spec.deps.iter().map(|d| d.slot.clone()));
        Ports {
            inputs,
            outputs: vec![self.output.clone()],
        }
    }

    fn bind(&mut self, slots: &SlotTable) -> Result<(), String> {
        model_slot(slots, &self.input)?;
        let want: Vec<Variable> = self
            .spec
            .vars
            .iter()
            .map(|(n, _)| Variable::new(n.clone(), ValueKind::Vertex))
            .collect();
        let got = assignment_vars(slots, &self.output)?;
        expect_vars(&self.output, &got, &want)?;
        let scope: Vec<(String, Ty)> = self
            .spec
            .vars
            .iter()
            .map(|(n, _)| (n.clone(), Ty::Any))
            .collect();
        self.predicates = self
            .spec
            .predicates
            .iter()
            .map(|p| {
                expr::compile(
                    &expr::parse(p)?,
                    &Scope {
                        outer: &scope,
                        inner: None,
                    },
                )
            })
            .collect::<Result<_, _>>()?;
        self.deps.clear();
        for d in &self.spec.deps {
            let vars = assignment_vars(slots, &d.slot)?;
            let mut binding = DepBinding {
                slot: d.slot.clone(),
                positive: d.positive,
                pattern_pos: Vec::new(),
                slot_pos: Vec::new(),
            };
            for (i, (name, _)) in self.spec.vars.iter().enumerate() {
                if let Some(j) = vars.iter().position(|v| &v.name == name) {
                    if vars[j].kind != ValueKind::Vertex {
                        return Err(format!(
                            "dependency `{}` binds `{name}` to {}, expected vertex",
                            d.slot, vars[j].kind
                        ));
                    }
                    binding.pattern_pos.push(i);
                    binding.slot_pos.push(j);
                }
            }
            self.deps.push(binding);
        }
        self.out_vars = want;
        Ok(())
    }

    fn load(&mut self, val: &Valuation) -> Result<(), OpError> {
        self.structural.clear();
        self.by_vertex.clear();
        self.dep_counts = vec![HashMap::new(); self.deps.len()];
        self.by_dep_key = vec![HashMap::new(); self.deps.len()];
        for (i, d) in self.deps.clone().iter().enumerate() {
            for t in val.assignment(&d.slot).tuples() {
                *self.dep_counts[i].entry(t.project(&d.slot_pos)).or_default() += 1;
            }
        }
        for m in self.all_matches(val.model(&self.input))? {
            self.index(&m);
        }
        Ok(())
    }

    fn update(&mut self, input: UpdateInput<'_>) -> Result<SlotDeltas, OpError> {
        let mut candidates: BTreeSet<Tuple> = BTreeSet::new();
        for (i, d) in self.deps.clone().iter().enumerate() {
            for (add, t) in tuple_changes(input.deltas(&d.slot)) {
                let key = t.project(&d.slot_pos);
                let count = self.dep_counts[i].entry(key.clone()).or_default();
                let before = *count;
                if add {
                    *count += 1;
                } else {
                    *count -= 1;
                }
                if *count == 0 {
                    self.dep_counts[i].remove(&key);
                }
                let after = self.dep_counts[i].get(&key).copied().unwrap_or(0);
                if (before == 0) != (after == 0) {
                    candidates.extend(self.by_dep_key[i].get(&key).into_iter().flatten().cloned());
                }
            }
        }
        let g = input.valuation.model(&self.input);
        let mut recheck: BTreeSet<Tuple> = BTreeSet::new();
        let mut seeds: Vec<Vec<(usize, String)>> = Vec::new();
        for d in input.deltas(&self.input) {
            match d {
                Delta::AddVertex(v) if self.relevant_vertex_type(&v.ty) => {
                    for i in 0..self.spec.vars.len() {
                        if self.var_type(i) == v.ty {
                            seeds.push(vec![(i, v.id.clone())]);
                        }
                    }
                }
                Delta::RemoveVertex(v) => {
                    recheck.extend(self.by_vertex.get(&v.id).into_iter().flatten().cloned());
                }
                Delta::AddEdge(e) | Delta::RemoveEdge(e) if self.relevant_edge_type(&e.ty) => {
                    let (Some(a), Some(b)) = (e.src.as_local(), e.tgt.as_local()) else {
                        continue;
                    };
                    if matches!(d, Delta::AddEdge(_)) {
                        for (s, ty, t) in &self.edges {
                            if *ty == e.ty {
                                seeds.push(vec![(*s, a.to_string()), (*t, b.to_string())]);
                            }
                        }
                        continue;
                    }
                    let size = |x: &str| self.by_vertex.get(x).map_or(0, BTreeSet::len);
                    let pivot = if size(a) <= size(b) { a } else { b };
                    let uses = |m: &&Tuple| {
                        self.edges.iter().any(|(s, ty, t)| {
                            *ty == e.ty
                                && m.get(*s) == &Value::Vertex(a.to_string())
                                && m.get(*t) == &Value::Vertex(b.to_string())
                        })
                    };
                    recheck.extend(self.by_vertex.get(pivot).into_iter().flatten().filter(uses).cloned());
                }
                _ => {}
            }
        }
        for m in recheck {
            self.probes += 1;
            if !self.holds(g, &m)? {
                self.unindex(&m);
                candidates.insert(m);
            }
        }
        for seed in seeds {
            let fixed: Vec<(usize, &str)> = seed.iter().map(|(i, id)| (*i, id.as_str())).collect();
            for m in self.enumerate_seeded(g, &fixed)? {
                if !self.structural.contains(&m) {
                    self.index(&m);
                    candidates.insert(m);
                }
            }
        }
        let current = input.valuation.assignment(&self.output);
        let mut raw = Vec::new();
        for m in candidates {
            let wanted = self.structural.contains(&m)
                && self.deps_hold(&m, |i, k| self.dep_counts[i].get(k).copied().unwrap_or(0));
            match (wanted, current.contains(&m)) {
                (true, false) => raw.push(Delta::AddTuple(m)),
                (false, true) => raw.push(Delta::RemoveTuple(m)),
                _ => {}
            }
        }
        Ok(emit(input.valuation, &self.output, raw))
    }

    fn dir_delta(&self, _changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        all_outputs(&self.ports())
    }

    fn batch(&self, val: &Valuation) -> Result<BTreeMap<SlotId, Content>, OpError> {
        let mut scratch = self.clone();
        let matches = scratch.all_matches(val.model(&self.input))?;
        let dep_sets: Vec<_> = self.deps.iter().map(|d| val.assignment(&d.slot)).collect();
        let kept = matches.into_iter().filter(|m| {
            self.deps_hold(m, |i, key| {
                dep_sets[i]
                    .tuples()
                    .filter(|t| t.project(&self.deps[i].slot_pos) == key)
                    .count()
            })
        });
        Ok(BTreeMap::from([(
            self.output.clone(),
            Content::Assignment(set_of(&self.out_vars, kept)),
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
