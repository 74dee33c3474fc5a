use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet, VecDeque};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Egdn, OpId, SlotId};

/// What the order analysis needs to know about a network.
pub trait Topology {
    /// Operation ids in ascending order.
    fn op_ids(&self) -> Vec<OpId>;
    fn has_slot(&self, slot: &str) -> bool;
    fn op_inputs(&self, op: &str) -> BTreeSet<SlotId>;
    fn slot_readers(&self, slot: &str) -> Vec<OpId>;
    fn slot_writers(&self, slot: &str) -> Vec<OpId>;
    /// Potential update directions of `op` given inputs with pending deltas.
    fn directions(&self, op: &str, changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId>;
    fn non_recursive(&self, op: &str) -> bool;
}

impl Topology for Egdn {
    fn op_ids(&self) -> Vec<OpId> {
        Egdn::op_ids(self).cloned().collect()
    }

    fn has_slot(&self, slot: &str) -> bool {
        self.slot(slot).is_some()
    }

    fn op_inputs(&self, op: &str) -> BTreeSet<SlotId> {
        self.op(op).map(|n| n.inputs.iter().cloned().collect()).unwrap_or_default()
    }

    fn slot_readers(&self, slot: &str) -> Vec<OpId> {
        self.readers(slot).cloned().collect()
    }

    fn slot_writers(&self, slot: &str) -> Vec<OpId> {
        self.writers(slot).cloned().collect()
    }

    fn directions(&self, op: &str, changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        self.op(op).map(|n| n.operator().dir_delta(changed)).unwrap_or_default()
    }

    fn non_recursive(&self, op: &str) -> bool {
        self.op(op).is_some_and(|n| n.operator().properties().non_recursive)
    }
}

/// One operation of a [`Skeleton`]; directions are a union of table rows, so
/// they are union monotonic by construction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonOp {
    pub inputs: BTreeSet<SlotId>,
    pub outputs: BTreeSet<SlotId>,
    /// Directions for an empty change set.
    pub base: BTreeSet<SlotId>,
    /// Directions contributed by each changed input.
    pub per_input: BTreeMap<SlotId, BTreeSet<SlotId>>,
    pub non_recursive: bool,
}

/// Network structure with tabulated directions and no behavior.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Skeleton {
    ops: BTreeMap<OpId, SkeletonOp>,
    readers: BTreeMap<SlotId, Vec<OpId>>,
    writers: BTreeMap<SlotId, Vec<OpId>>,
}

impl Skeleton {
    pub fn new(ops: BTreeMap<OpId, SkeletonOp>) -> Self {
        let mut readers: BTreeMap<SlotId, Vec<OpId>> = BTreeMap::new();
        let mut writers: BTreeMap<SlotId, Vec<OpId>> = BTreeMap::new();
        for (id, op) in &ops {
            for s in &op.inputs {
                readers.entry(s.clone()).or_default().push(id.clone());
            }
            for s in &op.outputs {
                writers.entry(s.clone()).or_default().push(id.clone());
            }
        }
        Skeleton { ops, readers, writers }
    }

    pub fn ops(&self) -> &BTreeMap<OpId, SkeletonOp> {
        &self.ops
    }

    pub fn slots(&self) -> BTreeSet<SlotId> {
        self.readers.keys().chain(self.writers.keys()).cloned().collect()
    }
}

impl Topology for Skeleton {
    fn op_ids(&self) -> Vec<OpId> {
        self.ops.keys().cloned().collect()
    }

    fn has_slot(&self, slot: &str) -> bool {
        self.readers.contains_key(slot) || self.writers.contains_key(slot)
    }

    fn op_inputs(&self, op: &str) -> BTreeSet<SlotId> {
        self.ops.get(op).map(|o| o.inputs.clone()).unwrap_or_default()
    }

    fn slot_readers(&self, slot: &str) -> Vec<OpId> {
        self.readers.get(slot).cloned().unwrap_or_default()
    }

    fn slot_writers(&self, slot: &str) -> Vec<OpId> {
        self.writers.get(slot).cloned().unwrap_or_default()
    }

    fn directions(&self, op: &str, changed: &BTreeSet<SlotId>) -> BTreeSet<SlotId> {
        let Some(o) = self.ops.get(op) else {
            return BTreeSet::new();
        };
        let mut out = o.base.clone();
        for s in changed {
            if let Some(row) = o.per_input.get(s) {
                out.extend(row.iter().cloned());
            }
        }
        out
    }

    fn non_recursive(&self, op: &str) -> bool {
        self.ops.get(op).is_some_and(|o| o.non_recursive)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("NotAnalyzable: operations without non-recursive updates: {}", .0.join(", "))]
    NotAnalyzable(Vec<OpId>),
    #[error("unknown slot `{0}`")]
    UnknownSlot(SlotId),
}

/// Dependencies discovered by the analysis: `o → o'` means running `o` may
/// require running `o'` afterwards.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TriggerGraph {
    pub vertices: BTreeSet<OpId>,
    pub edges: BTreeSet<(OpId, OpId)>,
    pub acyclic: bool,
    #[serde(skip)]
    succ: BTreeMap<OpId, BTreeSet<OpId>>,
}

impl TriggerGraph {
    fn add_vertex(&mut self, o: &str) {
        self.vertices.insert(o.to_string());
    }

    /// Adds `from → to` once; returns a cycle through the new edge, if any.
    fn add_edge(&mut self, from: &str, to: &str) -> Option<Vec<OpId>> {
        self.add_vertex(to);
        if !self.edges.insert((from.to_string(), to.to_string())) {
            return None;
        }
        self.succ.entry(from.to_string()).or_default().insert(to.to_string());
        // A cycle through the new edge is a path back from `to` to `from`.
        let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
        let mut seen = HashSet::from([to]);
        let mut stack = vec![to];
        while let Some(v) = stack.pop() {
            if v == from {
                // Walk parents back to `to`, then read the cycle forwards.
                let mut back = vec![from.to_string()];
                let mut cur = from;
                while cur != to {
                    cur = parent[cur];
                    back.push(cur.to_string());
                }
                let mut cycle = vec![from.to_string()];
                cycle.extend(back.into_iter().rev());
                return Some(cycle);
            }
            for w in self.succ.get(v).into_iter().flatten() {
                if seen.insert(w.as_str()) {
                    parent.insert(w.as_str(), v);
                    stack.push(w.as_str());
                }
            }
        }
        None
    }

    /// Kahn's algorithm, smallest ready id first.
    fn sort(&self) -> Vec<OpId> {
        let mut indegree: BTreeMap<&str, usize> =
            self.vertices.iter().map(|v| (v.as_str(), 0)).collect();
        for (_, to) in &self.edges {
            *indegree.get_mut(to.as_str()).expect("edge ends are vertices") += 1;
        }
        let mut ready: BinaryHeap<Reverse<&str>> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&v, _)| Reverse(v))
            .collect();
        let mut order = Vec::with_capacity(self.vertices.len());
        while let Some(Reverse(v)) = ready.pop() {
            order.push(v.to_string());
            for w in self.succ.get(v).into_iter().flatten() {
                let d = indegree.get_mut(w.as_str()).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(Reverse(w.as_str()));
                }
            }
        }
        order
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph trigger {\n");
        for v in &self.vertices {
            out.push_str(&format!("  \"{v}\";\n"));
        }
        for (a, b) in &self.edges {
            out.push_str(&format!("  \"{a}\" -> \"{b}\";\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Result of the order analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Analysis {
    /// Topological order of the trigger graph; `None` when a cycle arose.
    pub order: Option<Vec<OpId>>,
    /// Operations forming the detected cycle, first repeated at the end.
    pub cycle: Option<Vec<OpId>>,
    pub trigger: TriggerGraph,
    /// Slots the run may modify: every direction set produced along the way.
    pub closure: BTreeSet<SlotId>,
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.order, &self.cycle) {
            (Some(order), _) => writeln!(f, "ORDER {}", order.join(" "))?,
            (None, Some(cycle)) => writeln!(f, "NO ORDER (cycle: {})", cycle.join(" -> "))?,
            (None, None) => writeln!(f, "NO ORDER")?,
        }
        let closure: Vec<&str> = self.closure.iter().map(String::as_str).collect();
        write!(f, "CLOSURE {{{}}}", closure.join(", "))
    }
}

/// FIFO queue, or random dequeue positions for tie-break permutation tests.
struct WorkQueue<'r, R: Rng> {
    items: VecDeque<OpId>,
    present: HashSet<OpId>,
    rng: Option<&'r mut R>,
}

impl<R: Rng> WorkQueue<'_, R> {
    fn enqueue(&mut self, o: &str) {
        if self.present.insert(o.to_string()) {
            self.items.push_back(o.to_string());
        }
    }

    fn dequeue(&mut self) -> Option<OpId> {
        let o = match &mut self.rng {
            Some(rng) if !self.items.is_empty() => {
                let i = rng.gen_range(0..self.items.len());
                self.items.swap_remove_back(i)
            }
            _ => self.items.pop_front(),
        }?;
        self.present.remove(&o);
        Some(o)
    }
}

/// Finds an order in which running each operation once restores validity
/// after changes to `changed`, or reports the dependency cycle preventing it.
pub fn find_valid_update_order<T: Topology + ?Sized>(
    net: &T,
    changed: &BTreeSet<SlotId>,
) -> Result<Analysis, AnalysisError> {
    analyze::<T, rand::rngs::StdRng>(net, changed, None)
}

/// [`find_valid_update_order`] with queue positions drawn from `rng`.
pub fn find_valid_update_order_shuffled<T: Topology + ?Sized, R: Rng>(
    net: &T,
    changed: &BTreeSet<SlotId>,
    rng: &mut R,
) -> Result<Analysis, AnalysisError> {
    analyze(net, changed, Some(rng))
}

/// Slots that may be modified by running the network after changes to `changed`.
pub fn closure_delta<T: Topology + ?Sized>(
    net: &T,
    changed: &BTreeSet<SlotId>,
) -> Result<BTreeSet<SlotId>, AnalysisError> {
    Ok(find_valid_update_order(net, changed)?.closure)
}

fn analyze<T: Topology + ?Sized, R: Rng>(
    net: &T,
    changed: &BTreeSet<SlotId>,
    rng: Option<&mut R>,
) -> Result<Analysis, AnalysisError> {
    let recursive: Vec<OpId> = net
        .op_ids()
        .into_iter()
        .filter(|o| !net.non_recursive(o))
        .collect();
    if !recursive.is_empty() {
        return Err(AnalysisError::NotAnalyzable(recursive));
    }
    if let Some(s) = changed.iter().find(|s| !net.has_slot(s)) {
        return Err(AnalysisError::UnknownSlot(s.clone()));
    }
    let mut pending: BTreeMap<OpId, BTreeSet<SlotId>> = BTreeMap::new();
    let mut queue = WorkQueue {
        items: VecDeque::new(),
        present: HashSet::new(),
        rng,
    };
    let mut trigger = TriggerGraph::default();
    let mut closure = BTreeSet::new();

    let mut seeds = BTreeSet::new();
    for s in changed {
        seeds.extend(net.slot_readers(s));
        seeds.extend(net.slot_writers(s));
    }
    for o in &seeds {
        queue.enqueue(o);
        let inputs = net.op_inputs(o);
        pending.insert(o.clone(), changed.intersection(&inputs).cloned().collect());
        trigger.add_vertex(o);
    }
    while let Some(o) = queue.dequeue() {
        let c = pending.remove(&o).unwrap_or_default();
        let s_o = net.directions(&o, &c);
        let mut next = BTreeSet::new();
        for s in &s_o {
            next.extend(net.slot_readers(s));
            next.extend(net.slot_writers(s));
        }
        next.remove(&o);
        for o2 in &next {
            queue.enqueue(o2);
            let inputs = net.op_inputs(o2);
            pending
                .entry(o2.clone())
                .or_default()
                .extend(s_o.intersection(&inputs).cloned());
            if let Some(cycle) = trigger.add_edge(&o, o2) {
                closure.extend(s_o.iter().cloned());
                trigger.acyclic = false;
                return Ok(Analysis {
                    order: None,
                    cycle: Some(cycle),
                    trigger,
                    closure,
                });
            }
        }
        closure.extend(s_o);
    }
    trigger.acyclic = true;
    Ok(Analysis {
        order: Some(trigger.sort()),
        cycle: None,
        trigger,
        closure,
    })
}
