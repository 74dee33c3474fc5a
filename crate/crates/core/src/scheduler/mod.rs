//! Static order analysis, incremental execution, and edit policies.

mod analysis;
mod exec;
mod policy;

pub use analysis::{
    closure_delta, find_valid_update_order, find_valid_update_order_shuffled, Analysis,
    AnalysisError, Skeleton, SkeletonOp, Topology, TriggerGraph,
};
pub use exec::{
    batch_execute, changed_slots, default_budget, execute, execute_incremental_fixpoint,
    execute_incremental_ordered, ExecError, ExecOptions, ExecutionReport, OpRun, Outcome,
    Strategy, BUDGET_ENV, DEFAULT_BUDGET,
};
pub use policy::{direct_policy_check, policy_check, Decision, DenyReason, EditSession, Policy};
