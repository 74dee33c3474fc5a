use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::mpsc::Sender;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Content, DeltaSeq, ModelError};
use crate::network::{Egdn, NetworkError, OpError, OpId, Origin, SlotId, UpdateInput, Valuation};

use super::analysis::{find_valid_update_order, AnalysisError};

/// Environment variable overriding the fixpoint round budget.
pub const BUDGET_ENV: &str = "EGDN_FIXPOINT_BUDGET";
pub const DEFAULT_BUDGET: usize = 1000;

/// Round budget from [`BUDGET_ENV`], or the default when unset or unparsable.
pub fn default_budget() -> usize {
    std::env::var(BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(DEFAULT_BUDGET)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Ordered,
    Fixpoint,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ordered" => Ok(Strategy::Ordered),
            "fixpoint" => Ok(Strategy::Fixpoint),
            _ => Err(format!("unknown strategy `{s}` (expected ordered or fixpoint)")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Ordered => "ordered",
            Strategy::Fixpoint => "fixpoint",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExecOptions {
    pub strategy: Strategy,
    /// Fixpoint rounds before giving up; at least 1.
    pub max_rounds: usize,
    /// Ordered runs fall back to fixpoint iteration when no order exists.
    pub fallback: bool,
    /// Receives one record per executed operation.
    pub progress: Option<Sender<OpRun>>,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            strategy: Strategy::Ordered,
            max_rounds: default_budget(),
            fallback: true,
            progress: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum Outcome {
    Completed,
    Aborted { cycle: Vec<OpId> },
    BudgetExceeded { rounds: usize },
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Completed => f.write_str("Completed"),
            Outcome::Aborted { cycle } => write!(f, "Aborted(cycle: {})", cycle.join(" -> ")),
            Outcome::BudgetExceeded { rounds } => write!(f, "BudgetExceeded({rounds} rounds)"),
        }
    }
}

/// One execution of an operation's update.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OpRun {
    pub op: OpId,
    /// Deltas applied to output slots.
    pub emitted: usize,
    pub micros: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionReport {
    pub strategy: Strategy,
    pub outcome: Outcome,
    /// Order used by an ordered run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<OpId>>,
    /// Set when an ordered run found no order and fixpoint iteration took over.
    pub fell_back: bool,
    pub rounds: usize,
    pub runs: Vec<OpRun>,
    pub micros: u64,
}

impl ExecutionReport {
    fn new(strategy: Strategy) -> Self {
        ExecutionReport {
            strategy,
            outcome: Outcome::Completed,
            order: None,
            fell_back: false,
            rounds: 0,
            runs: Vec::new(),
            micros: 0,
        }
    }

    pub fn completed(&self) -> bool {
        self.outcome == Outcome::Completed
    }

    pub fn executed(&self) -> Vec<&str> {
        self.runs.iter().map(|r| r.op.as_str()).collect()
    }

    /// Total emitted deltas per operation.
    pub fn emitted(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for r in &self.runs {
            *out.entry(r.op.as_str()).or_default() += r.emitted;
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// One row per executed operation: `op,emitted,micros`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["op", "emitted", "micros"]).expect("in-memory write");
        for r in &self.runs {
            w.serialize((&r.op, r.emitted, r.micros)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{source} (in operation `{op}`)")]
    Operator { op: OpId, source: OpError },
    #[error("DirectionViolation: operation `{op}` emitted into `{slot}` outside its declared directions")]
    DirectionViolation { op: OpId, slot: SlotId },
    #[error("operation `{op}` produced inapplicable deltas for `{slot}`: {source}")]
    Apply { op: OpId, slot: SlotId, source: ModelError },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("{0} (while loading operations)")]
    Load(OpError),
}

impl ExecError {
    /// The operator error behind this failure, if any.
    pub fn op_error(&self) -> Option<&OpError> {
        match self {
            ExecError::Operator { source, .. } | ExecError::Load(source) => Some(source),
            _ => None,
        }
    }
}

/// Runs `o`'s update and checks its output deltas against its ports and,
/// when `check_dir` is set, its declared directions.
fn update_op(
    net: &mut Egdn,
    val: &Valuation,
    o: &str,
    check_dir: bool,
) -> Result<BTreeMap<SlotId, DeltaSeq>, ExecError> {
    let node = net.op_mut(o).expect("scheduled operations exist");
    let pending: BTreeSet<SlotId> = node
        .cache
        .iter()
        .filter(|(s, d)| !d.is_empty() && node.inputs.contains(s))
        .map(|(s, _)| s.clone())
        .collect();
    let out = node
        .op
        .update(UpdateInput {
            valuation: val,
            cache: &node.cache,
        })
        .map_err(|source| ExecError::Operator {
            op: o.to_string(),
            source,
        })?;
    let allowed = check_dir.then(|| node.op.dir_delta(&pending));
    let mut kept = BTreeMap::new();
    for (slot, deltas) in out {
        if deltas.is_empty() {
            continue;
        }
        let declared = node.outputs.contains(&slot)
            && allowed.as_ref().map_or(true, |a| a.contains(&slot));
        if !declared {
            return Err(ExecError::DirectionViolation {
                op: o.to_string(),
                slot,
            });
        }
        kept.insert(slot, deltas);
    }
    Ok(kept)
}

/// Applies output deltas and appends them to the caches of the slot's readers.
/// Returns the readers notified per slot.
fn apply_outputs(
    net: &mut Egdn,
    val: &mut Valuation,
    o: &str,
    out: &BTreeMap<SlotId, DeltaSeq>,
) -> Result<BTreeMap<SlotId, Vec<OpId>>, ExecError> {
    let mut notified = BTreeMap::new();
    for (slot, deltas) in out {
        let content = val.get_mut(slot).expect("output slots are valuated");
        content
            .apply_checked(deltas, net.type_graph_of(slot))
            .map_err(|source| ExecError::Apply {
                op: o.to_string(),
                slot: slot.clone(),
                source,
            })?;
        let readers: Vec<OpId> = net.readers(slot).cloned().collect();
        for r in &readers {
            net.op_mut(r).expect("readers exist").push_cache(slot, deltas);
        }
        net.log(slot, deltas, Origin::Operation(o.to_string()));
        notified.insert(slot.clone(), readers);
    }
    Ok(notified)
}

fn record(report: &mut ExecutionReport, opts: &ExecOptions, run: OpRun) {
    if let Some(tx) = &opts.progress {
        // A dropped receiver only means nobody is watching.
        let _ = tx.send(run.clone());
    }
    report.runs.push(run);
}

/// Slots with pending deltas at some operation.
pub fn changed_slots(net: &Egdn) -> BTreeSet<SlotId> {
    net.ops()
        .flat_map(|n| n.cache().iter())
        .filter(|(_, d)| !d.is_empty())
        .map(|(s, _)| s.clone())
        .collect()
}

/// Runs each operation at most once, in an order found by static analysis.
///
/// Returns an `Aborted` report, with nothing executed, when no order exists.
pub fn execute_incremental_ordered(
    net: &mut Egdn,
    val: &mut Valuation,
) -> Result<ExecutionReport, ExecError> {
    let opts = ExecOptions {
        fallback: false,
        ..ExecOptions::default()
    };
    run_ordered(net, val, &opts)
}

/// Fixpoint iteration over operations with pending changes.
pub fn execute_incremental_fixpoint(
    net: &mut Egdn,
    val: &mut Valuation,
    max_rounds: usize,
) -> Result<ExecutionReport, ExecError> {
    let opts = ExecOptions {
        strategy: Strategy::Fixpoint,
        max_rounds,
        ..ExecOptions::default()
    };
    run_fixpoint(net, val, &opts)
}

/// Runs the strategy chosen in `opts`.
pub fn execute(
    net: &mut Egdn,
    val: &mut Valuation,
    opts: &ExecOptions,
) -> Result<ExecutionReport, ExecError> {
    match opts.strategy {
        Strategy::Ordered => {
            let report = match run_ordered(net, val, opts) {
                Err(ExecError::Analysis(AnalysisError::NotAnalyzable(_))) if opts.fallback => None,
                Err(e) => return Err(e),
                Ok(r) if opts.fallback && !r.completed() => None,
                Ok(r) => Some(r),
            };
            match report {
                Some(r) => Ok(r),
                None => {
                    let mut r = run_fixpoint(net, val, opts)?;
                    r.fell_back = true;
                    Ok(r)
                }
            }
        }
        Strategy::Fixpoint => run_fixpoint(net, val, opts),
    }
}

fn run_ordered(
    net: &mut Egdn,
    val: &mut Valuation,
    opts: &ExecOptions,
) -> Result<ExecutionReport, ExecError> {
    let start = Instant::now();
    let mut report = ExecutionReport::new(Strategy::Ordered);
    let analysis = find_valid_update_order(&*net, &changed_slots(net))?;
    let Some(order) = analysis.order else {
        report.outcome = Outcome::Aborted {
            cycle: analysis.cycle.unwrap_or_default(),
        };
        report.micros = start.elapsed().as_micros() as u64;
        return Ok(report);
    };
    for o in &order {
        let t = Instant::now();
        let out = update_op(net, val, o, true)?;
        apply_outputs(net, val, o, &out)?;
        net.op_mut(o).expect("scheduled operations exist").cache.clear();
        let run = OpRun {
            op: o.clone(),
            emitted: out.values().map(Vec::len).sum(),
            micros: t.elapsed().as_micros() as u64,
        };
        record(&mut report, opts, run);
    }
    report.order = Some(order);
    report.rounds = 1;
    report.micros = start.elapsed().as_micros() as u64;
    Ok(report)
}

fn run_fixpoint(
    net: &mut Egdn,
    val: &mut Valuation,
    opts: &ExecOptions,
) -> Result<ExecutionReport, ExecError> {
    let start = Instant::now();
    let mut report = ExecutionReport::new(Strategy::Fixpoint);
    let budget = opts.max_rounds.max(1);
    let mut due: BTreeSet<OpId> = net
        .ops()
        .filter(|n| n.has_pending())
        .map(|n| n.id.clone())
        .collect();
    while !due.is_empty() {
        if report.rounds == budget {
            report.outcome = Outcome::BudgetExceeded { rounds: budget };
            break;
        }
        report.rounds += 1;
        let mut next = BTreeSet::new();
        let round: Vec<OpId> = due.iter().cloned().collect();
        for o in &round {
            due.remove(o);
            let t = Instant::now();
            let out = update_op(net, val, o, false)?;
            net.op_mut(o).expect("scheduled operations exist").cache.clear();
            let notified = apply_outputs(net, val, o, &out)?;
            for (slot, readers) in &notified {
                for r in readers {
                    if !due.contains(r) {
                        next.insert(r.clone());
                    }
                }
                for w in net.writers(slot) {
                    if w != o && !due.contains(w) {
                        next.insert(w.clone());
                    }
                }
            }
            let run = OpRun {
                op: o.clone(),
                emitted: out.values().map(Vec::len).sum(),
                micros: t.elapsed().as_micros() as u64,
            };
            record(&mut report, opts, run);
        }
        due = next;
    }
    report.micros = start.elapsed().as_micros() as u64;
    Ok(report)
}

/// Recomputes the network from scratch: every slot is emptied, `base`
/// contents are replayed as creation deltas, and the result is propagated.
///
/// Only user-editable slots may receive base contents.
pub fn batch_execute(
    net: &mut Egdn,
    base: &BTreeMap<SlotId, Content>,
    opts: &ExecOptions,
) -> Result<(Valuation, ExecutionReport), ExecError> {
    for slot in base.keys() {
        if net.slot(slot).is_none() {
            return Err(NetworkError::UnknownSlot(slot.clone()).into());
        }
        if net.is_pure_output(slot) {
            return Err(NetworkError::PureOutputEdit(slot.clone()).into());
        }
    }
    let mut val = net.empty_valuation();
    net.load(&val).map_err(ExecError::Load)?;
    for (slot, content) in base {
        net.record_edit(&mut val, slot, &content.seed_deltas(), true)?;
    }
    let report = execute(net, &mut val, opts)?;
    Ok((val, report))
}
