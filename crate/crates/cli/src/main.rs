//! `egdn`: validate, analyze, run and benchmark networks of model operations.
//!
//! Exit codes: 0 ok, 1 usage or input error, 2 aborted (no order),
//! 3 fixpoint budget exceeded, 4 evaluation error, 5 policy violation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use egdn::bench::{run_bench, to_csv, BenchConfig, BenchStrategy};
use egdn::io::{content_from_json, content_to_json, DeltaScript, NetworkSpec, Registry};
use egdn::model::{Content, TypedGraph};
use egdn::network::{build_network, Egdn, NetworkError, SlotId, Valuation};
use egdn::scheduler::{
    batch_execute, default_budget, execute, find_valid_update_order, AnalysisError, EditSession,
    ExecError, ExecOptions, ExecutionReport, Outcome, Policy, Strategy,
};

#[derive(Debug, Parser)]
#[command(name = "egdn", version, about = "Incremental execution of model-operation networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check a network spec and its declared contents.
    Validate {
        spec: PathBuf,
        /// Print the network as Graphviz DOT.
        #[arg(long)]
        dot: bool,
    },
    /// Find an update order for edits to the given slots.
    Analyze {
        spec: PathBuf,
        #[arg(long, value_delimiter = ',')]
        changed: Vec<String>,
        /// Print the trigger graph as Graphviz DOT.
        #[arg(long)]
        dot: bool,
    },
    /// Apply a delta script and propagate it.
    Run {
        spec: PathBuf,
        #[arg(long)]
        deltas: PathBuf,
        #[arg(long, default_value = "ordered")]
        strategy: Strategy,
        /// Reject edits the closure-locking policy denies.
        #[arg(long)]
        enforce_policy: bool,
        /// Fall back to fixpoint iteration when no order exists.
        #[arg(long)]
        fallback: bool,
        /// Slot contents overriding the spec, as `slot=path.json`.
        #[arg(long = "content", value_parser = binding)]
        contents: Vec<(SlotId, PathBuf)>,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Recompute every derived slot from the user-editable contents.
    Batch {
        spec: PathBuf,
        #[arg(long = "content", value_parser = binding)]
        contents: Vec<(SlotId, PathBuf)>,
        #[arg(long)]
        json: bool,
    },
    /// Time attribute-add updates on the bundled class-diagram network.
    Bench {
        #[arg(long, default_value_t = 500)]
        classes: usize,
        #[arg(long, default_value_t = 30)]
        updates: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 2)]
        attributes: usize,
        /// Initial class diagram (model JSON) instead of the synthetic one.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "incremental,batch")]
        strategies: Vec<BenchStrategy>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn binding(s: &str) -> Result<(SlotId, PathBuf), String> {
    let (slot, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected `slot=path`, got `{s}`"))?;
    Ok((slot.to_string(), PathBuf::from(path)))
}

/// A failed command and its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }

    fn eval(message: impl ToString) -> Self {
        Failure {
            code: 4,
            message: message.to_string(),
        }
    }
}

impl From<ExecError> for Failure {
    fn from(e: ExecError) -> Self {
        let code = match &e {
            ExecError::Analysis(_) => 2,
            ExecError::Network(NetworkError::PureOutputEdit(_)) => 5,
            ExecError::Network(_) => 1,
            _ => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<NetworkSpec, Failure> {
    NetworkSpec::from_json(&read(path)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Builds the network with the spec's contents, overridden per slot.
fn load(path: &Path, overrides: &[(SlotId, PathBuf)]) -> Result<(Egdn, Valuation), Failure> {
    let spec = load_spec(path)?;
    let builder = Registry::standard().builder(&spec).map_err(Failure::usage)?;
    let mut contents = spec.contents().map_err(Failure::usage)?;
    for (slot, file) in overrides {
        let decl = spec
            .slots
            .iter()
            .find(|s| &s.id == slot)
            .ok_or_else(|| Failure::usage(format!("unknown slot `{slot}`")))?;
        let json: serde_json::Value = serde_json::from_str(&read(file)?).map_err(|e| {
            Failure::usage(format!("{}: line {}, column {}: {e}", file.display(), e.line(), e.column()))
        })?;
        let decl = egdn::network::Slot {
            id: decl.id.clone(),
            kind: decl.kind.clone(),
        };
        contents.insert(slot.clone(), content_from_json(&decl, &json).map_err(Failure::usage)?);
    }
    build_network(builder, contents).map_err(Failure::usage)
}

fn user_contents(net: &Egdn, val: &Valuation) -> BTreeMap<SlotId, Content> {
    net.user_slots()
        .map(|s| (s.clone(), val.content(s).clone()))
        .collect()
}

fn options(strategy: Strategy, fallback: bool) -> ExecOptions {
    ExecOptions {
        strategy,
        max_rounds: default_budget(),
        fallback,
        progress: None,
    }
}

/// A valuation satisfying every operation, derived by batch execution when
/// the given contents are not already consistent.
fn consistent(net: &mut Egdn, val: Valuation) -> Result<Valuation, Failure> {
    if net.network_valid(&val) {
        return Ok(val);
    }
    eprintln!("note: contents are not consistent; recomputing derived slots");
    let (val, report) = batch_execute(net, &user_contents(net, &val), &options(Strategy::Ordered, true))?;
    outcome_result(&report)?;
    Ok(val)
}

fn outcome_result(report: &ExecutionReport) -> CmdResult {
    match &report.outcome {
        Outcome::Completed => Ok(()),
        Outcome::Aborted { .. } => Err(Failure {
            code: 2,
            message: report.outcome.to_string(),
        }),
        Outcome::BudgetExceeded { .. } => Err(Failure {
            code: 3,
            message: report.outcome.to_string(),
        }),
    }
}

fn print_report(report: &ExecutionReport, json: bool) {
    if json {
        println!("{}", report.to_json());
        return;
    }
    println!("outcome: {}", report.outcome);
    println!("strategy: {}{}", report.strategy, if report.fell_back { " (fell back to fixpoint)" } else { "" });
    if let Some(order) = &report.order {
        println!("order: {}", order.join(" "));
    }
    println!("rounds: {}", report.rounds);
    for (op, n) in report.emitted() {
        println!("emitted {op}: {n}");
    }
}

/// Writes `<slot>.out.json` beside the spec for every slot.
fn write_outputs(spec: &Path, val: &Valuation) -> CmdResult {
    let dir = spec.parent().unwrap_or(Path::new("."));
    for (slot, content) in val.iter() {
        let path = dir.join(format!("{slot}.out.json"));
        let mut text = serde_json::to_string_pretty(&content_to_json(content)).expect("json");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn validate(spec: &Path, dot: bool) -> CmdResult {
    let (net, val) = load(spec, &[])?;
    if dot {
        print!("{}", net.to_dot());
        return Ok(());
    }
    println!("valid: {} slots, {} operations", net.slots().len(), net.op_ids().count());
    if let Some(op) = net.first_invalid(&val) {
        println!("note: declared contents are not consistent with operation `{op}`");
    }
    Ok(())
}

fn analyze(spec: &Path, changed: &[String], dot: bool) -> CmdResult {
    let (net, _) = load(spec, &[])?;
    let changed: BTreeSet<SlotId> = changed.iter().cloned().collect();
    let analysis = find_valid_update_order(&net, &changed).map_err(|e| match e {
        AnalysisError::UnknownSlot(_) => Failure::usage(e),
        AnalysisError::NotAnalyzable(_) => Failure {
            code: 2,
            message: e.to_string(),
        },
    })?;
    println!("{analysis}");
    if dot {
        print!("{}", analysis.trigger.to_dot());
    }
    if analysis.order.is_none() {
        return Err(Failure {
            code: 2,
            message: "no update order".into(),
        });
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run(
    spec: &Path,
    deltas: &Path,
    strategy: Strategy,
    enforce_policy: bool,
    fallback: bool,
    contents: &[(SlotId, PathBuf)],
    json: bool,
) -> CmdResult {
    let script = DeltaScript::parse(&read(deltas)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", deltas.display())))?;
    let (mut net, val) = load(spec, contents)?;
    let mut val = consistent(&mut net, val)?;
    let edits = script.resolve(&val).map_err(Failure::usage)?;
    let mut session = EditSession::new(Policy::ClosureLocking);
    for (slot, group) in &edits {
        if enforce_policy {
            let decision = session.request(&net, slot).map_err(|e| Failure {
                code: 5,
                message: e.to_string(),
            })?;
            if !decision.allowed() {
                return Err(Failure {
                    code: 5,
                    message: format!("edit of `{slot}`: {decision}"),
                });
            }
        }
        net.record_edit(&mut val, slot, group, true).map_err(|e| match e {
            NetworkError::PureOutputEdit(_) => Failure {
                code: 5,
                message: e.to_string(),
            },
            other => Failure::usage(other),
        })?;
    }
    let report = execute(&mut net, &mut val, &options(strategy, fallback))?;
    print_report(&report, json);
    outcome_result(&report)?;
    write_outputs(spec, &val)
}

fn batch(spec: &Path, contents: &[(SlotId, PathBuf)], json: bool) -> CmdResult {
    let (mut net, val) = load(spec, contents)?;
    let base = user_contents(&net, &val);
    let (val, report) = batch_execute(&mut net, &base, &options(Strategy::Ordered, true))?;
    print_report(&report, json);
    outcome_result(&report)?;
    write_outputs(spec, &val)
}

#[allow(clippy::too_many_arguments)]
fn bench(
    classes: usize,
    updates: usize,
    reps: usize,
    attributes: usize,
    base: Option<&Path>,
    strategies: Vec<BenchStrategy>,
    out: Option<&Path>,
) -> CmdResult {
    if updates == 0 {
        return Err(Failure::usage("--updates must be at least 1"));
    }
    let mut cfg = BenchConfig::with_classes(classes);
    cfg.updates = updates;
    cfg.repetitions = reps;
    cfg.attributes = attributes;
    cfg.strategies = strategies;
    if let Some(path) = base {
        let g: TypedGraph = serde_json::from_str(&read(path)?)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        cfg.base = Some(g);
    }
    let rows = run_bench(&cfg, |r| {
        eprintln!("update {:>3} {:<11} {:>10.3} ms ± {:.3}", r.update, r.strategy, r.mean_ms, r.stddev_ms)
    })
    .map_err(Failure::eval)?;
    let csv = to_csv(&rows);
    match out {
        Some(path) => fs::write(path, csv).map_err(|e| Failure::usage(format!("{}: {e}", path.display()))),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.cmd {
        Cmd::Validate { spec, dot } => validate(spec, *dot),
        Cmd::Analyze { spec, changed, dot } => analyze(spec, changed, *dot),
        Cmd::Run {
            spec,
            deltas,
            strategy,
            enforce_policy,
            fallback,
            contents,
            json,
        } => run(spec, deltas, *strategy, *enforce_policy, *fallback, contents, *json),
        Cmd::Batch { spec, contents, json } => batch(spec, contents, *json),
        Cmd::Bench {
            classes,
            updates,
            reps,
            attributes,
            base,
            strategies,
            out,
        } => bench(*classes, *updates, *reps, *attributes, base.as_deref(), strategies.clone(), out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
