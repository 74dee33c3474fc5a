use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::{Content, Delta, Edge, Endpoint, GraphPatch, TypedGraph, Vertex};
use crate::network::{
    all_outputs, NodeClass, OpError, Operator, Ports, Properties, SlotDeltas, SlotId, SlotKind,
    SlotTable, UpdateInput, Valuation,
};

use super::common::{model_slot, props};

/// Correspondence vertices and edges written by synchronizers.
pub const LINK_TYPE: &str = "Link";
pub const LINK_SOURCE: &str = "source";
pub const LINK_TARGET: &str = "target";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParentLink {
    /// Source edge type from the parent anchor to this anchor.
    pub edge_type: String,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TargetVertex {
    pub key: String,
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(default)]
    pub copy_payload: bool,
}

/// Endpoint of a created edge: `key` (this anchor) or `parent.key`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ElemRef {
    Own(String),
    Parent(String),
}

impl TryFrom<String> for ElemRef {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        match s.split_once('.') {
            Some(("parent", key)) => Ok(ElemRef::Parent(key.to_string())),
            Some(_) => Err(format!("bad element reference `{s}`")),
            None => Ok(ElemRef::Own(s)),
        }
    }
}

impl From<ElemRef> for String {
    fn from(r: ElemRef) -> String {
        match r {
            ElemRef::Own(k) => k,
            ElemRef::Parent(k) => format!("parent.{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetEdge {
    pub key: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub src: ElemRef,
    pub tgt: ElemRef,
}

/// One correspondence rule, anchored at source vertices of one type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SyncRule {
    pub name: String,
    pub source_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<ParentLink>,
    #[serde(default)]
    pub targets: Vec<TargetVertex>,
    #[serde(default)]
    pub edges: Vec<TargetEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SyncRuleSet {
    pub rules: Vec<SyncRule>,
}

fn is_key(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_')
}

impl SyncRuleSet {
    /// Rules must not overlap on anchor types; keys must keep derived ids injective.
    pub fn validate(&self) -> Result<(), String> {
        let mut names = BTreeSet::new();
        let mut types = BTreeSet::new();
        for r in &self.rules {
            if !names.insert(&r.name) {
                return Err(format!("duplicate rule `{}`", r.name));
            }
            if !types.insert(&r.source_type) {
                return Err(format!(
                    "rules overlap on anchor type `{}`",
                    r.source_type
                ));
            }
        }
        for r in &self.rules {
            let mut keys = BTreeSet::new();
            for t in &r.targets {
                if !is_key(&t.key) || !keys.insert(&t.key) {
                    return Err(format!("rule `{}`: bad or repeated key `{}`", r.name, t.key));
                }
            }
            let mut edge_keys = BTreeSet::new();
            for e in &r.edges {
                if !is_key(&e.key) || !edge_keys.insert(&e.key) {
                    return Err(format!("rule `{}`: bad or repeated edge key `{}`", r.name, e.key));
                }
                for end in [&e.src, &e.tgt] {
                    match end {
                        ElemRef::Own(k) if !keys.contains(k) => {
                            return Err(format!("rule `{}`: unknown key `{k}`", r.name))
                        }
                        ElemRef::Parent(k) => {
                            let parent = r
                                .parent
                                .as_ref()
                                .and_then(|p| self.rules.iter().find(|q| q.name == p.rule))
                                .ok_or_else(|| {
                                    format!("rule `{}` references a parent it lacks", r.name)
                                })?;
                            if !parent.targets.iter().any(|t| &t.key == k) {
                                return Err(format!(
                                    "rule `{}`: parent rule `{}` has no key `{k}`",
                                    r.name, parent.name
                                ));
                            }
                        }
                        _ => {}
                    }
                }
            }
            if let Some(p) = &r.parent {
                if !self.rules.iter().any(|q| q.name == p.rule) {
                    return Err(format!("rule `{}`: unknown parent rule `{}`", r.name, p.rule));
                }
            }
        }
        // Parent chains must end.
        for r in &self.rules {
            let mut seen = BTreeSet::new();
            let mut cur = Some(r);
            while let Some(rule) = cur {
                if !seen.insert(&rule.name) {
                    return Err(format!("cyclic parent chain through `{}`", rule.name));
                }
                cur = rule
                    .parent
                    .as_ref()
                    .and_then(|p| self.rules.iter().find(|q| q.name == p.rule));
            }
        }
        Ok(())
    }
}

pub(crate) fn target_id(anchor: &str, key: &str) -> String {
    format!("{anchor}.{key}")
}

pub(crate) fn link_id(anchor: &str, key: &str) -> String {
    format!("{anchor}~{key}")
}

/// Translation status of an anchor: its rule and chosen parent.
type Status = Option<(usize, Option<String>)>;

/// Unidirectional synchronizer: source → target plus correspondence links.
#[derive(Debug, Clone)]
pub struct SyncUni {
    source: SlotId,
    target: SlotId,
    corr: SlotId,
    corr_input: bool,
    rules: SyncRuleSet,
    by_type: HashMap<String, usize>,
    /// Parent edge types, for finding children of an anchor.
    child_edges: BTreeSet<String>,
    status: HashMap<String, (usize, Option<String>)>,
    probes: u64,
}

impl SyncUni {
    pub fn new(source: &str, target: &str, corr: &str, rules: SyncRuleSet) -> Result<Self, String> {
        rules.validate()?;
        let by_type = rules
            .rules
            .iter()
            .enumerate()
            .map(|(i, r)| (r.source_type.clone(), i))
            .collect();
        let child_edges = rules
            .rules
            .iter()
            .filter_map(|r| r.parent.as_ref().map(|p| p.edge_type.clone()))
            .collect();
        Ok(SyncUni {
            source: source.into(),
            target: target.into(),
            corr: corr.into(),
            corr_input: false,
            rules,
            by_type,
            child_edges,
            status: HashMap::new(),
            probes: 0,
        })
    }

    /// Also reads the correspondence slot, so edits to it are repaired.
    pub fn with_corr_input(mut self) -> Self {
        self.corr_input = true;
        self
    }

    pub fn rules(&self) -> &SyncRuleSet {
        &self.rules
    }

    fn status_of(
        &self,
        g: &TypedGraph,
        anchor: &str,
        memo: &mut HashMap<String, Status>,
    ) -> Status {
        if let Some(s) = memo.get(anchor) {
            return s.clone();
        }
        let result = (|| {
            let v = g.vertex(anchor)?;
            let r = *self.by_type.get(&v.ty)?;
            let Some(p) = &self.rules.rules[r].parent else {
                return Some((r, None));
            };
            let parent_rule = self.rules.rules.iter().position(|q| q.name == p.rule)?;
            let mut parents: Vec<&str> = g
                .in_edges(&Endpoint::local(anchor))
                .filter(|e| e.ty == p.edge_type)
                .filter_map(|e| e.src.as_local())
                .collect();
            parents.sort_unstable();
            parents
                .into_iter()
                .find(|q| matches!(self.status_of(g, q, memo), Some((pr, _)) if pr == parent_rule))
                .map(|q| (r, Some(q.to_string())))
        })();
        memo.insert(anchor.to_string(), result.clone());
        result
    }

    /// Writes the desired fragment of `anchor` (or its absence) into the patches.
    fn fragment(
        &self,
        g: &TypedGraph,
        anchor: &str,
        status: &Status,
        graphs: (&str, &str),
        target: &mut GraphPatch,
        corr: &mut GraphPatch,
    ) {
        let (src_graph, tgt_graph) = graphs;
        for (ri, rule) in self.rules.rules.iter().enumerate() {
            let active = match status {
                Some((r, parent)) if *r == ri => Some(parent.as_deref()),
                _ => None,
            };
            for t in &rule.targets {
                let id = target_id(anchor, &t.key);
                let lid = link_id(anchor, &t.key);
                let (v, link, ls, lt) = match active {
                    Some(_) => {
                        let mut v = Vertex::new(id.clone(), t.ty.clone());
                        if t.copy_payload {
                            v.payload = g.vertex(anchor).and_then(|s| s.payload.clone());
                        }
                        let ls = Edge {
                            id: format!("{lid}.src"),
                            ty: LINK_SOURCE.into(),
                            src: Endpoint::local(lid.clone()),
                            tgt: Endpoint::external(src_graph, anchor),
                        };
                        let lt = Edge {
                            id: format!("{lid}.tgt"),
                            ty: LINK_TARGET.into(),
                            src: Endpoint::local(lid.clone()),
                            tgt: Endpoint::external(tgt_graph, id.clone()),
                        };
                        (
                            Some(v),
                            Some(Vertex::new(lid.clone(), LINK_TYPE)),
                            Some(ls),
                            Some(lt),
                        )
                    }
                    None => (None, None, None, None),
                };
                target.set_vertex(&id, v);
                corr.set_vertex(&lid, link);
                corr.set_edge(&format!("{lid}.src"), ls);
                corr.set_edge(&format!("{lid}.tgt"), lt);
            }
            for e in &rule.edges {
                let id = target_id(anchor, &e.key);
                let edge = active.and_then(|parent| {
                    let resolve = |r: &ElemRef| match r {
                        ElemRef::Own(k) => Some(target_id(anchor, k)),
                        ElemRef::Parent(k) => parent.map(|p| target_id(p, k)),
                    };
                    Some(Edge {
                        id: id.clone(),
                        ty: e.ty.clone(),
                        src: Endpoint::local(resolve(&e.src)?),
                        tgt: Endpoint::local(resolve(&e.tgt)?),
                    })
                });
                target.set_edge(&id, edge);
            }
        }
    }

    fn check_links(&self, anchor: &str, target: &TypedGraph, corr: &TypedGraph) -> Result<(), OpError> {
        for rule in &self.rules.rules {
            for t in &rule.targets {
                let id = target_id(anchor, &t.key);
                let lid = link_id(anchor, &t.key);
                if target.vertex(&id).is_some() != corr.vertex(&lid).is_some() {
                    return Err(OpError::Consistency(format!(
                        "correspondence `{lid}` and target element `{id}` disagree"
                    )));
                }
            }
        }
        Ok(())
    }

    fn translate(&self, g: &TypedGraph, val: &Valuation) -> (TypedGraph, TypedGraph) {
        let mut memo = HashMap::new();
        let mut target = GraphPatch::default();
        let mut corr = GraphPatch::default();
        let graphs = (g.id(), val.model(&self.target).id());
        for v in g.vertices() {
            if self.by_type.contains_key(&v.ty) {
                let status = self.status_of(g, &v.id, &mut memo);
                self.fragment(g, &v.id, &status, graphs, &mut target, &mut corr);
            }
        }
        let fresh = |slot: &str, patch: &GraphPatch| {
            let mut c = val.content(slot).empty_like();
            let deltas = patch.to_deltas(c.as_model().expect("bound to a model slot"));
            c.apply(&deltas).expect("fresh translation applies");
            match c {
                Content::Model(g) => g,
                Content::Assignment(_) => unreachable!(),
            }
        };
        (fresh(&self.target, &target), fresh(&self.corr, &corr))
    }
}

impl Operator for SyncUni {
    fn type_name(&self) -> &'static str {
        "sync_uni"
    }

    fn class(&self) -> NodeClass {
        NodeClass::Transformation
    }

    fn ports(&self) -> Ports {
        let mut inputs = vec![self.source.clone()];
        if self.corr_input {
            inputs.push(self.corr.clone());
        }
        Ports {
            inputs,
            outputs: vec![self.target.clone(), self.corr.clone()],
        }
    }

    fn bind(&mut self, slots: &SlotTable) -> Result<(), String> {
        model_slot(slots, &self.source)?;
        model_slot(slots, &self.target)?;
        match slots.get(&self.corr).map(|s| &s.kind) {
            Some(SlotKind::Model { linking: true, .. }) => Ok(()),
            _ => Err(format!("slot `{}` must be a linking model", self.corr)),
        }
    }

    fn load(&mut self, val: &Valuation) -> Result<(), OpError> {
        self.status.clear();
        let g = val.model(&self.source);
        let mut memo = HashMap::new();
        for v in g.vertices() {
            if let Some(s) = self.status_of(g, &v.id, &mut memo) {
                self.status.insert(v.id.clone(), s);
            }
        }
        Ok(())
    }

    fn update(&mut self, input: UpdateInput<'_>) -> Result<SlotDeltas, OpError> {
        let val = input.valuation;
        let g = val.model(&self.source);
        let tgt = val.model(&self.target);
        let corr = val.model(&self.corr);
        let mut queue: BTreeSet<String> = BTreeSet::new();
        for d in input.deltas(&self.source) {
            match d {
                Delta::AddVertex(v) | Delta::RemoveVertex(v) if self.by_type.contains_key(&v.ty) => {
                    queue.insert(v.id.clone());
                }
                Delta::AddEdge(e) | Delta::RemoveEdge(e) if self.child_edges.contains(&e.ty) => {
                    queue.extend(e.tgt.as_local().map(str::to_string));
                }
                _ => {}
            }
        }
        if self.corr_input {
            for d in input.deltas(&self.corr) {
                let id = match d {
                    Delta::AddVertex(v) | Delta::RemoveVertex(v) => v.id.as_str(),
                    Delta::AddEdge(e) | Delta::RemoveEdge(e) => {
                        e.id.rsplit_once('.').map_or(e.id.as_str(), |(l, _)| l)
                    }
                    _ => continue,
                };
                if let Some((anchor, _)) = id.rsplit_once('~') {
                    queue.insert(anchor.to_string());
                }
            }
        }
        let mut memo = HashMap::new();
        let mut tpatch = GraphPatch::default();
        let mut cpatch = GraphPatch::default();
        let mut done = BTreeSet::new();
        while let Some(anchor) = queue.pop_first() {
            if !done.insert(anchor.clone()) {
                continue;
            }
            self.probes += 1;
            self.check_links(&anchor, tgt, corr)?;
            let status = self.status_of(g, &anchor, &mut memo);
            self.fragment(g, &anchor, &status, (g.id(), tgt.id()), &mut tpatch, &mut cpatch);
            let old = self.status.get(&anchor).cloned();
            if old != status {
                match &status {
                    Some(s) => self.status.insert(anchor.clone(), s.clone()),
                    None => self.status.remove(&anchor),
                };
                for e in g.out_edges(&Endpoint::local(anchor.clone())) {
                    if self.child_edges.contains(&e.ty) {
                        if let Some(child) = e.tgt.as_local() {
                            if !done.contains(child) {
                                queue.insert(child.to_string());
                            }
                        }
                    }
                }
            }
        }
        Ok(BTreeMap::from([
            (self.target.clone(), tpatch.to_deltas(tgt)),
            (self.corr.clone(), cpatch.to_deltas(corr)),
        ]))
    }

    fn dir_delta(&self, _changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        all_outputs(&self.ports())
    }

    fn batch(&self, val: &Valuation) -> Result<BTreeMap<SlotId, Content>, OpError> {
        let (t, c) = self.translate(val.model(&self.source), val);
        Ok(BTreeMap::from([
            (self.target.clone(), Content::Model(t)),
            (self.corr.clone(), Content::Model(c)),
        ]))
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
