use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::{Content, Delta, Edge, Endpoint, GraphPatch, TypedGraph, Vertex};
use crate::network::{
    NodeClass, OpError, Operator, Ports, Properties, SlotDeltas, SlotId, SlotKind, SlotTable,
    UpdateInput, Valuation,
};

use super::common::{model_slot, props};
use super::sync_uni::{LINK_SOURCE, LINK_TARGET, LINK_TYPE};

/// Type correspondences of a bidirectional synchronizer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BiMapping {
    pub vertex_map: BTreeMap<String, String>,
    #[serde(default)]
    pub edge_map: BTreeMap<String, String>,
    #[serde(default = "default_tsfx")]
    pub target_suffix: String,
    #[serde(default = "default_ssfx")]
    pub source_suffix: String,
}

fn default_tsfx() -> String {
    "_t".into()
}

fn default_ssfx() -> String {
    "_s".into()
}

impl BiMapping {
    pub fn new(vertex_map: &[(&str, &str)], edge_map: &[(&str, &str)]) -> Self {
        BiMapping {
            vertex_map: vertex_map.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            edge_map: edge_map.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            target_suffix: default_tsfx(),
            source_suffix: default_ssfx(),
        }
    }

    fn validate(&self) -> Result<(), String> {
        let injective = |m: &BTreeMap<String, String>| {
            m.values().collect::<BTreeSet<_>>().len() == m.len()
        };
        if !injective(&self.vertex_map) || !injective(&self.edge_map) {
            return Err("type mappings must be bijective".into());
        }
        if self.target_suffix.is_empty() || self.source_suffix.is_empty() {
            return Err("id suffixes must be non-empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Source,
    Target,
}

impl Side {
    fn other(self) -> Side {
        match self {
            Side::Source => Side::Target,
            Side::Target => Side::Source,
        }
    }
}

/// Link vertex ids per paired element, both directions.
#[derive(Debug, Default, Clone)]
struct Pairs {
    s2t: HashMap<String, (String, String)>,
    t2s: HashMap<String, (String, String)>,
}

impl Pairs {
    fn get(&self, side: Side, id: &str) -> Option<&(String, String)> {
        match side {
            Side::Source => self.s2t.get(id),
            Side::Target => self.t2s.get(id),
        }
    }

    fn insert(&mut self, a: &str, t: &str, link: &str) {
        self.s2t.insert(a.into(), (t.into(), link.into()));
        self.t2s.insert(t.into(), (a.into(), link.into()));
    }

    fn remove(&mut self, a: &str, t: &str) {
        self.s2t.remove(a);
        self.t2s.remove(t);
    }
}

/// Reads links from a correspondence model; `None` if some link is malformed
/// or an element is linked twice.
fn parse_pairs(corr: &TypedGraph, sid: &str, tid: &str) -> Option<Pairs> {
    let mut ends: BTreeMap<&str, (Option<&str>, Option<&str>)> = BTreeMap::new();
    for v in corr.vertices() {
        if v.ty != LINK_TYPE {
            return None;
        }
        ends.insert(&v.id, (None, None));
    }
    for e in corr.edges() {
        let (Some(link), Endpoint::External(x)) = (e.src.as_local(), &e.tgt) else {
            return None;
        };
        let slot = ends.get_mut(link)?;
        match e.ty.as_str() {
            LINK_SOURCE if x.graph == sid && slot.0.is_none() => slot.0 = Some(&x.vertex),
            LINK_TARGET if x.graph == tid && slot.1.is_none() => slot.1 = Some(&x.vertex),
            _ => return None,
        }
    }
    let mut pairs = Pairs::default();
    for (link, ends) in ends {
        let (Some(a), Some(t)) = ends else {
            return None;
        };
        if pairs.s2t.contains_key(a) || pairs.t2s.contains_key(t) {
            return None;
        }
        pairs.insert(a, t, link);
    }
    Some(pairs)
}

fn link_id(a: &str, t: &str) -> String {
    format!("{a}<->{t}")
}

/// Bidirectional synchronizer keeping two models and a correspondence model
/// consistent under a bijective type mapping.
///
/// Consistency: links pair mapped vertices bijectively with matching types and
/// payloads, and for every mapped edge type the number of edges between each
/// pair of paired vertices agrees.
#[derive(Debug, Clone)]
pub struct SyncBi {
    source: SlotId,
    target: SlotId,
    corr: SlotId,
    map: BiMapping,
    fwd_v: BTreeMap<String, String>,
    back_v: BTreeMap<String, String>,
    fwd_e: BTreeMap<String, String>,
    back_e: BTreeMap<String, String>,
    probes: u64,
}

/// Per-update working state: patches for the three models and live pairs.
struct Work<'a> {
    graphs: [&'a TypedGraph; 2],
    patches: [GraphPatch; 2],
    corr: GraphPatch,
    pairs: Pairs,
    fresh_links: Vec<(String, String, Side)>,
}

impl<'a> Work<'a> {
    fn graph(&self, side: Side) -> &'a TypedGraph {
        self.graphs[side as usize]
    }

    fn patch(&mut self, side: Side) -> &mut GraphPatch {
        &mut self.patches[side as usize]
    }

    fn vertex(&self, side: Side, id: &str) -> Option<&Vertex> {
        self.patches[side as usize].vertex(self.graphs[side as usize], id)
    }

    fn taken(&self, side: Side, id: &str) -> bool {
        self.vertex(side, id).is_some()
            || self.patches[side as usize].edge(self.graphs[side as usize], id).is_some()
    }

    fn fresh(&self, side: Side, base: &str, sfx: &str) -> String {
        let mut id = format!("{base}{sfx}");
        while self.taken(side, &id) {
            id.push_str(sfx);
        }
        id
    }

    fn link(&mut self, a: &str, t: &str, sid: &str, tid: &str) {
        let l = link_id(a, t);
        self.corr.set_vertex(&l, Some(Vertex::new(l.clone(), LINK_TYPE)));
        self.corr.set_edge(
            &format!("{l}.src"),
            Some(Edge {
                id: format!("{l}.src"),
                ty: LINK_SOURCE.into(),
                src: Endpoint::local(l.clone()),
                tgt: Endpoint::external(sid, a),
            }),
        );
        self.corr.set_edge(
            &format!("{l}.tgt"),
            Some(Edge {
                id: format!("{l}.tgt"),
                ty: LINK_TARGET.into(),
                src: Endpoint::local(l.clone()),
                tgt: Endpoint::external(tid, t),
            }),
        );
        self.pairs.insert(a, t, &l);
    }

    fn unlink(&mut self, a: &str, t: &str) {
        if let Some((_, l)) = self.pairs.s2t.get(a).cloned() {
            // Incident edges of a removed link go with it.
            self.corr.set_vertex(&l, None);
            self.corr.set_edge(&format!("{l}.src"), None);
            self.corr.set_edge(&format!("{l}.tgt"), None);
        }
        self.pairs.remove(a, t);
    }
}

impl SyncBi {
    pub fn new(source: &str, target: &str, corr: &str, map: BiMapping) -> Result<Self, String> {
        map.validate()?;
        let invert = |m: &BTreeMap<String, String>| {
            m.iter().map(|(a, b)| (b.clone(), a.clone())).collect()
        };
        Ok(SyncBi {
            source: source.into(),
            target: target.into(),
            corr: corr.into(),
            fwd_v: map.vertex_map.clone(),
            back_v: invert(&map.vertex_map),
            fwd_e: map.edge_map.clone(),
            back_e: invert(&map.edge_map),
            map,
            probes: 0,
        })
    }

    pub fn mapping(&self) -> &BiMapping {
        &self.map
    }

    fn vmap(&self, side: Side) -> &BTreeMap<String, String> {
        match side {
            Side::Source => &self.fwd_v,
            Side::Target => &self.back_v,
        }
    }

    fn emap(&self, side: Side) -> &BTreeMap<String, String> {
        match side {
            Side::Source => &self.fwd_e,
            Side::Target => &self.back_e,
        }
    }

    /// Suffix for elements created on `side`.
    fn suffix(&self, side: Side) -> &str {
        match side {
            Side::Source => &self.map.source_suffix,
            Side::Target => &self.map.target_suffix,
        }
    }

    fn mapped<'v>(&self, side: Side, v: Option<&'v Vertex>) -> Option<&'v Vertex> {
        v.filter(|v| self.vmap(side).contains_key(&v.ty))
    }

    /// The counterpart of `v` (from `side`) under id `id`.
    fn image(&self, side: Side, v: &Vertex, id: &str) -> Vertex {
        Vertex {
            id: id.into(),
            ty: self.vmap(side)[&v.ty].clone(),
            payload: v.payload.clone(),
        }
    }

    fn compatible(&self, side: Side, v: &Vertex, w: &Vertex) -> bool {
        self.vmap(side).get(&v.ty) == Some(&w.ty) && v.payload == w.payload
    }

    fn ids(&self, val: &Valuation) -> (String, String) {
        (
            val.model(&self.source).id().to_string(),
            val.model(&self.target).id().to_string(),
        )
    }

    /// Mapped edges from `a1` to `a2` on `side`, with type `ty`.
    fn edges_between<'g>(
        &self,
        g: &'g TypedGraph,
        ty: &str,
        a1: &str,
        a2: &str,
    ) -> Vec<&'g Edge> {
        g.out_edges(&Endpoint::local(a1))
            .filter(|e| e.ty == ty && e.tgt.as_local() == Some(a2))
            .collect()
    }

    /// Checks the consistency relation directly.
    pub fn consistent(&self, val: &Valuation) -> bool {
        let s = val.model(&self.source);
        let t = val.model(&self.target);
        let (sid, tid) = self.ids(val);
        let Some(pairs) = parse_pairs(val.model(&self.corr), &sid, &tid) else {
            return false;
        };
        let paired = |side: Side, g: &TypedGraph| {
            let map = pairs_of(&pairs, side);
            g.vertices()
                .filter(|v| self.vmap(side).contains_key(&v.ty))
                .count()
                == map.len()
        };
        if !paired(Side::Source, s) || !paired(Side::Target, t) {
            return false;
        }
        for (a, (tv, _)) in &pairs.s2t {
            match (s.vertex(a), t.vertex(tv)) {
                (Some(x), Some(y)) if self.compatible(Side::Source, x, y) => {}
                _ => return false,
            }
        }
        let count = |side: Side, g: &TypedGraph| {
            let map = pairs_of(&pairs, side);
            let mut counts: BTreeMap<(String, String, String), usize> = BTreeMap::new();
            for e in g.edges() {
                let Some(ty) = self.emap(side).get(&e.ty) else {
                    continue;
                };
                let (Some(x), Some(y)) = (e.src.as_local(), e.tgt.as_local()) else {
                    continue;
                };
                let (Some((px, _)), Some((py, _))) = (map.get(x), map.get(y)) else {
                    continue;
                };
                // Keys are expressed on the source side.
                let key = match side {
                    Side::Source => (e.ty.clone(), x.to_string(), y.to_string()),
                    Side::Target => (ty.clone(), px.clone(), py.clone()),
                };
                *counts.entry(key).or_default() += 1;
            }
            counts
        };
        count(Side::Source, s) == count(Side::Target, t)
    }

    /// Target and correspondence models translated from the source alone.
    pub fn forward_translate(&self, val: &Valuation) -> (TypedGraph, TypedGraph) {
        let s = val.model(&self.source);
        let (sid, tid) = self.ids(val);
        let sfx = &self.map.target_suffix;
        let mut deltas = Vec::new();
        let mut cdeltas = Vec::new();
        for v in s.vertices().filter(|v| self.fwd_v.contains_key(&v.ty)) {
            let id = format!("{}{sfx}", v.id);
            deltas.push(Delta::AddVertex(self.image(Side::Source, v, &id)));
            let l = link_id(&v.id, &id);
            cdeltas.push(Delta::AddVertex(Vertex::new(l.clone(), LINK_TYPE)));
            cdeltas.push(Delta::AddEdge(Edge {
                id: format!("{l}.src"),
                ty: LINK_SOURCE.into(),
                src: Endpoint::local(l.clone()),
                tgt: Endpoint::external(&sid, &v.id),
            }));
            cdeltas.push(Delta::AddEdge(Edge {
                id: format!("{l}.tgt"),
                ty: LINK_TARGET.into(),
                src: Endpoint::local(l.clone()),
                tgt: Endpoint::external(&tid, id),
            }));
        }
        let mapped = |id: Option<&str>| {
            id.and_then(|x| s.vertex(x))
                .filter(|v| self.fwd_v.contains_key(&v.ty))
                .is_some()
        };
        for e in s.edges() {
            let Some(ty) = self.fwd_e.get(&e.ty) else {
                continue;
            };
            if !mapped(e.src.as_local()) || !mapped(e.tgt.as_local()) {
                continue;
            }
            let end = |p: &Endpoint| Endpoint::local(format!("{}{sfx}", p.as_local().unwrap()));
            // Suffixing keeps vertex ids distinct, and edge ids likewise.
            deltas.push(Delta::AddEdge(Edge {
                id: format!("{}{sfx}", e.id),
                ty: ty.clone(),
                src: end(&e.src),
                tgt: end(&e.tgt),
            }));
        }
        let build = |slot: &str, deltas: &[Delta]| {
            let mut c = val.content(slot).empty_like();
            c.apply(deltas).expect("forward translation is well formed");
            match c {
                Content::Model(g) => g,
                Content::Assignment(_) => unreachable!("bound to a model slot"),
            }
        };
        (build(&self.target, &deltas), build(&self.corr, &cdeltas))
    }

    /// Reconciles one linked pair after edits to either side.
    fn reconcile_pair(
        &self,
        w: &mut Work<'_>,
        a: &str,
        t: &str,
        vtouched: &[BTreeSet<String>; 2],
        ids: &(String, String),
    ) -> Result<(), OpError> {
        let sa = self.mapped(Side::Source, w.vertex(Side::Source, a)).cloned();
        let tv = self.mapped(Side::Target, w.vertex(Side::Target, t)).cloned();
        let ts = vtouched[0].contains(a);
        let tt = vtouched[1].contains(t);
        let conflict = || {
            OpError::Conflict(format!(
                "`{a}` and `{t}` were both edited and no longer correspond"
            ))
        };
        match (sa, tv) {
            (None, None) => w.unlink(a, t),
            (None, Some(y)) => {
                if ts && tt {
                    return Err(conflict());
                }
                if ts {
                    w.patch(Side::Target).set_vertex(t, None);
                    w.unlink(a, t);
                } else {
                    let x = self.image(Side::Target, &y, a);
                    w.patch(Side::Source).set_vertex(a, Some(x));
                }
            }
            (Some(x), None) => {
                if ts && tt {
                    return Err(conflict());
                }
                if tt {
                    w.patch(Side::Source).set_vertex(a, None);
                    w.unlink(a, t);
                } else {
                    let y = self.image(Side::Source, &x, t);
                    w.patch(Side::Target).set_vertex(t, Some(y));
                }
            }
            (Some(x), Some(y)) => {
                if !self.compatible(Side::Source, &x, &y) {
                    if ts && tt {
                        return Err(conflict());
                    }
                    if tt {
                        let x = self.image(Side::Target, &y, a);
                        w.patch(Side::Source).set_vertex(a, Some(x));
                    } else {
                        let y = self.image(Side::Source, &x, t);
                        w.patch(Side::Target).set_vertex(t, Some(y));
                    }
                }
                // A link with a stale id is re-created canonically.
                let l = link_id(a, t);
                if w.pairs.s2t.get(a).map(|(_, id)| id) != Some(&l) {
                    w.unlink(a, t);
                    w.link(a, t, &ids.0, &ids.1);
                }
            }
        }
        Ok(())
    }

    /// Pairs an unlinked vertex with a compatible unlinked counterpart, or creates one.
    fn reconcile_single(&self, w: &mut Work<'_>, side: Side, id: &str, ids: &(String, String)) {
        let Some(v) = self.mapped(side, w.vertex(side, id)).cloned() else {
            return;
        };
        let other = side.other();
        let own_sfx = self.suffix(side);
        let mut candidates: Vec<String> = Vec::new();
        if let Some(base) = id.strip_suffix(own_sfx) {
            candidates.push(base.to_string());
        }
        candidates.push(format!("{id}{}", self.suffix(other)));
        candidates.push(id.to_string());
        let found = candidates.into_iter().find(|c| {
            w.pairs.get(other, c).is_none()
                && self
                    .mapped(other, w.vertex(other, c))
                    .is_some_and(|u| self.compatible(side, &v, u))
        });
        let counterpart = match found {
            Some(c) => c,
            None => {
                let c = w.fresh(other, id, self.suffix(other));
                let img = self.image(side, &v, &c);
                w.patch(other).set_vertex(&c, Some(img));
                c
            }
        };
        match side {
            Side::Source => w.link(id, &counterpart, &ids.0, &ids.1),
            Side::Target => w.link(&counterpart, id, &ids.0, &ids.1),
        }
        w.fresh_links.push(match side {
            Side::Source => (id.to_string(), counterpart, side),
            Side::Target => (counterpart, id.to_string(), side),
        });
    }

    /// Brings the edge count of one source-side key in line across both models.
    fn reconcile_edges(
        &self,
        w: &mut Work<'_>,
        key: &(String, String, String),
        from: Side,
    ) {
        let (sty, a1, a2) = key;
        let (Some((t1, _)), Some((t2, _))) = (
            w.pairs.s2t.get(a1).cloned(),
            w.pairs.s2t.get(a2).cloned(),
        ) else {
            return;
        };
        let tty = &self.fwd_e[sty];
        let s_edges = self.edges_between(w.graph(Side::Source), sty, a1, a2);
        let t_edges = self.edges_between(w.graph(Side::Target), tty, &t1, &t2);
        if s_edges.len() == t_edges.len() {
            return;
        }
        let (have, want, to, ends, ty) = match from {
            Side::Source => (s_edges, t_edges, Side::Target, (t1, t2), tty.clone()),
            Side::Target => (t_edges, s_edges, Side::Source, (a1.clone(), a2.clone()), sty.clone()),
        };
        let sfx = self.suffix(to).to_string();
        let counterpart_ids: BTreeSet<String> =
            have.iter().map(|e| format!("{}{sfx}", e.id)).collect();
        if want.len() > have.len() {
            let mut surplus: Vec<&Edge> = want.clone();
            surplus.sort_by_key(|e| (counterpart_ids.contains(&e.id), e.id.clone()));
            for e in &surplus[..want.len() - have.len()] {
                w.patch(to).set_edge(&e.id, None);
            }
        } else {
            let existing: BTreeSet<&str> = want.iter().map(|e| e.id.as_str()).collect();
            let missing = have.len() - want.len();
            let mut sources: Vec<&Edge> = have
                .iter()
                .filter(|e| !existing.contains(format!("{}{sfx}", e.id).as_str()))
                .copied()
                .collect();
            sources.extend(have.iter().copied());
            for e in sources.into_iter().take(missing) {
                let id = w.fresh(to, &e.id, &sfx);
                let edge = Edge {
                    id: id.clone(),
                    ty: ty.clone(),
                    src: Endpoint::local(ends.0.clone()),
                    tgt: Endpoint::local(ends.1.clone()),
                };
                w.patch(to).set_edge(&id, Some(edge));
            }
        }
    }
}

fn pairs_of(pairs: &Pairs, side: Side) -> &HashMap<String, (String, String)> {
    match side {
        Side::Source => &pairs.s2t,
        Side::Target => &pairs.t2s,
    }
}

impl Operator for SyncBi {
    fn type_name(&self) -> &'static str {
        "sync_bi"
    }

    fn class(&self) -> NodeClass {
        NodeClass::Transformation
    }

    fn ports(&self) -> Ports {
        let all = vec![self.source.clone(), self.target.clone(), self.corr.clone()];
        Ports {
            inputs: all.clone(),
            outputs: all,
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

    fn load(&mut self, _val: &Valuation) -> Result<(), OpError> {
        Ok(())
    }

    fn update(&mut self, input: UpdateInput<'_>) -> Result<SlotDeltas, OpError> {
        let val = input.valuation;
        let ids = self.ids(val);
        let pairs = parse_pairs(val.model(&self.corr), &ids.0, &ids.1).ok_or_else(|| {
            OpError::Consistency(format!("`{}` is not a valid correspondence model", self.corr))
        })?;
        let mut w = Work {
            graphs: [val.model(&self.source), val.model(&self.target)],
            patches: [GraphPatch::default(), GraphPatch::default()],
            corr: GraphPatch::default(),
            pairs,
            fresh_links: Vec::new(),
        };
        // Vertices whose own content changed, and vertices touched at all.
        let mut vtouched: [BTreeSet<String>; 2] = Default::default();
        let mut touched: [BTreeSet<String>; 2] = Default::default();
        let mut edge_keys: BTreeMap<(String, String, String), [bool; 2]> = BTreeMap::new();
        let mut target_edges: Vec<&Edge> = Vec::new();
        for (side, slot) in [(Side::Source, &self.source), (Side::Target, &self.target)] {
            for d in input.deltas(slot) {
                self.probes += 1;
                match d {
                    Delta::AddVertex(v) | Delta::RemoveVertex(v) => {
                        vtouched[side as usize].insert(v.id.clone());
                        touched[side as usize].insert(v.id.clone());
                    }
                    Delta::AddEdge(e) | Delta::RemoveEdge(e) => {
                        if !self.emap(side).contains_key(&e.ty) {
                            continue;
                        }
                        let (Some(x), Some(y)) = (e.src.as_local(), e.tgt.as_local()) else {
                            continue;
                        };
                        touched[side as usize].insert(x.into());
                        touched[side as usize].insert(y.into());
                        match side {
                            Side::Source => {
                                edge_keys
                                    .entry((e.ty.clone(), x.into(), y.into()))
                                    .or_default()[0] = true;
                            }
                            Side::Target => target_edges.push(e),
                        }
                    }
                    _ => {}
                }
            }
        }
        for d in input.deltas(&self.corr) {
            self.probes += 1;
            if let Delta::AddEdge(e) | Delta::RemoveEdge(e) = d {
                if let Endpoint::External(x) = &e.tgt {
                    if x.graph == ids.0 {
                        touched[0].insert(x.vertex.clone());
                    } else if x.graph == ids.1 {
                        touched[1].insert(x.vertex.clone());
                    }
                }
            }
        }

        let mut linked: BTreeSet<(String, String)> = BTreeSet::new();
        for side in [Side::Source, Side::Target] {
            for id in &touched[side as usize] {
                if let Some((other, _)) = w.pairs.get(side, id) {
                    linked.insert(match side {
                        Side::Source => (id.clone(), other.clone()),
                        Side::Target => (other.clone(), id.clone()),
                    });
                }
            }
        }
        for (a, t) in &linked {
            self.reconcile_pair(&mut w, a, t, &vtouched, &ids)?;
        }
        for side in [Side::Source, Side::Target] {
            for id in &touched[side as usize] {
                if w.pairs.get(side, id).is_none() {
                    self.reconcile_single(&mut w, side, id, &ids);
                }
            }
        }

        for e in target_edges {
            let (x, y) = (e.src.as_local().unwrap(), e.tgt.as_local().unwrap());
            if let (Some((a1, _)), Some((a2, _))) = (w.pairs.t2s.get(x), w.pairs.t2s.get(y)) {
                let key = (self.back_e[&e.ty].clone(), a1.clone(), a2.clone());
                edge_keys.entry(key).or_default()[1] = true;
            }
        }
        // Fresh pairs pull in every incident mapped edge, following the side that created them.
        let mut derived: BTreeMap<(String, String, String), Side> = BTreeMap::new();
        for (a, t, side) in std::mem::take(&mut w.fresh_links) {
            for (s, id) in [(Side::Source, &a), (Side::Target, &t)] {
                let g = w.graph(s);
                let end = Endpoint::local(id.clone());
                for e in g.out_edges(&end).chain(g.in_edges(&end)) {
                    let Some(mapped_ty) = self.emap(s).get(&e.ty) else {
                        continue;
                    };
                    let (Some(x), Some(y)) = (e.src.as_local(), e.tgt.as_local()) else {
                        continue;
                    };
                    let key = match s {
                        Side::Source => (e.ty.clone(), x.to_string(), y.to_string()),
                        Side::Target => {
                            let (Some((a1, _)), Some((a2, _))) =
                                (w.pairs.t2s.get(x), w.pairs.t2s.get(y))
                            else {
                                continue;
                            };
                            (mapped_ty.clone(), a1.clone(), a2.clone())
                        }
                    };
                    derived.entry(key).or_insert(side);
                }
            }
        }
        for (key, side) in derived {
            edge_keys.entry(key.clone()).or_default();
            let flags = edge_keys[&key];
            if !flags[0] && !flags[1] {
                self.reconcile_edges(&mut w, &key, side);
            }
        }
        for (key, flags) in &edge_keys {
            let from = match flags {
                [true, true] => {
                    let (sty, a1, a2) = key;
                    let (Some((t1, _)), Some((t2, _))) =
                        (w.pairs.s2t.get(a1), w.pairs.s2t.get(a2))
                    else {
                        continue;
                    };
                    let ns = self.edges_between(w.graph(Side::Source), sty, a1, a2).len();
                    let nt = self
                        .edges_between(w.graph(Side::Target), &self.fwd_e[sty], t1, t2)
                        .len();
                    if ns != nt {
                        return Err(OpError::Conflict(format!(
                            "`{sty}` edges from `{a1}` to `{a2}` were edited on both sides"
                        )));
                    }
                    continue;
                }
                [true, false] => Side::Source,
                [false, true] => Side::Target,
                [false, false] => continue,
            };
            self.reconcile_edges(&mut w, key, from);
        }

        let [sp, tp] = &w.patches;
        Ok(BTreeMap::from([
            (self.source.clone(), sp.to_deltas(w.graphs[0])),
            (self.target.clone(), tp.to_deltas(w.graphs[1])),
            (self.corr.clone(), w.corr.to_deltas(val.model(&self.corr))),
        ]))
    }

    fn dir_delta(&self, changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        let all: BTreeSet<SlotId> = self.ports().outputs.into_iter().collect();
        let only = |s: &SlotId| changed.len() == 1 && changed.contains(s);
        if changed.is_empty() {
            BTreeSet::new()
        } else if only(&self.source) {
            BTreeSet::from([self.target.clone(), self.corr.clone()])
        } else if only(&self.target) {
            BTreeSet::from([self.source.clone(), self.corr.clone()])
        } else {
            all
        }
    }

    fn batch(&self, val: &Valuation) -> Result<BTreeMap<SlotId, Content>, OpError> {
        if self.consistent(val) {
            return Ok([&self.source, &self.target, &self.corr]
                .into_iter()
                .map(|s| (s.clone(), val.content(s).clone()))
                .collect());
        }
        let (t, c) = self.forward_translate(val);
        Ok(BTreeMap::from([
            (self.source.clone(), val.content(&self.source).clone()),
            (self.target.clone(), Content::Model(t)),
            (self.corr.clone(), Content::Model(c)),
        ]))
    }

    fn is_consistent(&self, val: &Valuation) -> Result<bool, OpError> {
        Ok(self.consistent(val))
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
