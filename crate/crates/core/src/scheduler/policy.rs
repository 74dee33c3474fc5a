use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::network::{OpId, SlotId};

use super::analysis::{find_valid_update_order, AnalysisError, Topology};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum DenyReason {
    /// No single-pass order exists for the enlarged edit set.
    NoOrder { cycle: Vec<OpId> },
    /// Propagation could overwrite these manually edited slots.
    Overwrite { slots: BTreeSet<SlotId> },
    /// Earlier edits must be propagated first.
    Pending { slots: BTreeSet<SlotId> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "decision")]
pub enum Decision {
    Allow,
    Deny(DenyReason),
}

impl Decision {
    pub fn allowed(&self) -> bool {
        matches!(self, Decision::Allow)
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |s: &BTreeSet<SlotId>| s.iter().cloned().collect::<Vec<_>>().join(", ");
        match self {
            Decision::Allow => f.write_str("Allow"),
            Decision::Deny(DenyReason::NoOrder { cycle }) => {
                write!(f, "Deny(no-order: cycle {})", cycle.join(" -> "))
            }
            Decision::Deny(DenyReason::Overwrite { slots }) => {
                write!(f, "Deny(overwrite: {})", list(slots))
            }
            Decision::Deny(DenyReason::Pending { slots }) => {
                write!(f, "Deny(pending: {})", list(slots))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Policy {
    /// One slot at a time; edits must be propagated before another slot is touched.
    Direct,
    /// Any slot whose addition keeps an order and keeps edited slots out of the closure.
    #[default]
    ClosureLocking,
}

/// Propagation-closure locking: editing `candidate` on top of `edited` is
/// allowed iff an order exists and no edited slot lies in the closure.
pub fn policy_check<T: Topology + ?Sized>(
    net: &T,
    edited: &BTreeSet<SlotId>,
    candidate: &str,
) -> Result<Decision, AnalysisError> {
    let mut all = edited.clone();
    all.insert(candidate.to_string());
    let analysis = find_valid_update_order(net, &all)?;
    if analysis.order.is_none() {
        return Ok(Decision::Deny(DenyReason::NoOrder {
            cycle: analysis.cycle.unwrap_or_default(),
        }));
    }
    let hit: BTreeSet<SlotId> = all.intersection(&analysis.closure).cloned().collect();
    if !hit.is_empty() {
        return Ok(Decision::Deny(DenyReason::Overwrite { slots: hit }));
    }
    Ok(Decision::Allow)
}

/// Direct propagation: only the slot already being edited, or any slot when
/// nothing is pending.
pub fn direct_policy_check(edited: &BTreeSet<SlotId>, candidate: &str) -> Decision {
    let others: BTreeSet<SlotId> = edited.iter().filter(|s| *s != candidate).cloned().collect();
    if others.is_empty() {
        Decision::Allow
    } else {
        Decision::Deny(DenyReason::Pending { slots: others })
    }
}

/// Tracks manually edited slots between propagations.
#[derive(Debug, Clone, Default)]
pub struct EditSession {
    pub policy: Policy,
    edited: BTreeSet<SlotId>,
}

impl EditSession {
    pub fn new(policy: Policy) -> Self {
        EditSession {
            policy,
            edited: BTreeSet::new(),
        }
    }

    pub fn edited(&self) -> &BTreeSet<SlotId> {
        &self.edited
    }

    /// Checks `slot` and, when allowed, records it as edited.
    pub fn request<T: Topology + ?Sized>(
        &mut self,
        net: &T,
        slot: &str,
    ) -> Result<Decision, AnalysisError> {
        let decision = match self.policy {
            Policy::Direct => direct_policy_check(&self.edited, slot),
            Policy::ClosureLocking => policy_check(net, &self.edited, slot)?,
        };
        if decision.allowed() {
            self.edited.insert(slot.to_string());
        }
        Ok(decision)
    }

    /// Forgets edits once they have been propagated.
    pub fn propagated(&mut self) {
        self.edited.clear();
    }
}
