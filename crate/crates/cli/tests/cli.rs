use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Copies the named fixture files into a fresh directory.
fn workspace(files: &[&str]) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in files {
        fs::copy(fixtures().join(f), dir.path().join(f)).unwrap();
    }
    dir
}

fn egdn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egdn"))
        .current_dir(dir)
        .args(args)
        .env_remove("EGDN_FIXPOINT_BUDGET")
        .output()
        .unwrap()
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

#[test]
fn validate_accepts_bench_spec() {
    let dir = workspace(&["bench.json"]);
    let out = egdn(dir.path(), &["validate", "bench.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    assert!(text(&out).contains("valid: 13 slots, 11 operations"));
}

#[test]
fn validate_reports_arity_violation() {
    let dir = workspace(&["bench.json"]);
    let spec = fs::read_to_string(dir.path().join("bench.json")).unwrap();
    let bad = spec.replacen("\"id\": \"sync\",", "\"id\": \"sync\",\n      \"class\": \"query\",", 1);
    assert_ne!(bad, spec);
    fs::write(dir.path().join("bad.json"), bad).unwrap();
    let out = egdn(dir.path(), &["validate", "bad.json"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(text(&out).contains("ArityViolation"), "{}", text(&out));
}

#[test]
fn validate_reports_parse_location() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("broken.json"), "{\n  \"slots\": [\n    {\"id\": }\n  ]\n}\n").unwrap();
    let out = egdn(dir.path(), &["validate", "broken.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains("line 3, column"), "{}", text(&out));
}

#[test]
fn analyze_bench_prints_order() {
    let dir = workspace(&["bench.json"]);
    let out = egdn(dir.path(), &["analyze", "bench.json", "--changed", "cd"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let s = text(&out);
    assert!(s.starts_with("ORDER sync "), "{s}");
    assert!(s.contains("CLOSURE {asg, corr, cpm, cpt, cptc, ctc, ctm, ipm, ipt, iptc, itc, itm}"), "{s}");
}

#[test]
fn analyze_cycle_reports_no_order() {
    let dir = workspace(&["oscillating.json"]);
    let out = egdn(dir.path(), &["analyze", "oscillating.json", "--changed", "L"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("NO ORDER (cycle: "), "{}", text(&out));
}

#[test]
fn analyze_unknown_slot_is_usage_error() {
    let dir = workspace(&["bench.json"]);
    let out = egdn(dir.path(), &["analyze", "bench.json", "--changed", "nope"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = egdn(Path::new("."), &["analyze", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_bench_edit_updates_metrics_deterministically() {
    let dir = workspace(&["bench.json", "bench-edit.deltas"]);
    let args = ["run", "bench.json", "--deltas", "bench-edit.deltas"];
    let out = egdn(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    assert!(text(&out).contains("outcome: Completed"));
    for slot in ["ipm", "cpm"] {
        let pm = fs::read_to_string(dir.path().join(format!("{slot}.out.json"))).unwrap();
        let json: serde_json::Value = serde_json::from_str(&pm).unwrap();
        let counts: Vec<i64> = json["tuples"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t[1]["int"].as_i64().unwrap())
            .collect();
        // The new attribute adds a getter and a setter to each type of p0.
        assert_eq!(counts, vec![14, 12], "{slot}");
    }
    let first: Vec<Vec<u8>> = ["asg", "corr", "ipm", "cpm", "cd"]
        .iter()
        .map(|s| fs::read(dir.path().join(format!("{s}.out.json"))).unwrap())
        .collect();
    let again = egdn(dir.path(), &args);
    assert_eq!(again.status.code(), Some(0));
    let second: Vec<Vec<u8>> = ["asg", "corr", "ipm", "cpm", "cd"]
        .iter()
        .map(|s| fs::read(dir.path().join(format!("{s}.out.json"))).unwrap())
        .collect();
    assert_eq!(first, second);
}

#[test]
fn run_policy_violation_exits_5() {
    let dir = workspace(&["sync-bi.json", "sync-bi-both.deltas"]);
    let out = egdn(
        dir.path(),
        &["run", "sync-bi.json", "--deltas", "sync-bi-both.deltas", "--enforce-policy"],
    );
    assert_eq!(out.status.code(), Some(5), "{}", text(&out));
    assert!(text(&out).contains("Deny(overwrite: left, right)"), "{}", text(&out));
}

#[test]
fn run_oscillation_exhausts_budget() {
    let dir = workspace(&["oscillating.json", "oscillating.deltas"]);
    let out = Command::new(env!("CARGO_BIN_EXE_egdn"))
        .current_dir(dir.path())
        .args(["run", "oscillating.json", "--deltas", "oscillating.deltas", "--strategy", "fixpoint"])
        .env("EGDN_FIXPOINT_BUDGET", "25")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", text(&out));
    assert!(text(&out).contains("BudgetExceeded(25 rounds)"), "{}", text(&out));
}

#[test]
fn run_ordered_without_fallback_aborts() {
    let dir = workspace(&["oscillating.json", "oscillating.deltas"]);
    let out = egdn(dir.path(), &["run", "oscillating.json", "--deltas", "oscillating.deltas"]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out));
}

#[test]
fn run_monotone_deletion_converges_with_fallback() {
    let dir = workspace(&["monotone.json", "monotone.deltas"]);
    let out = egdn(
        dir.path(),
        &["run", "monotone.json", "--deltas", "monotone.deltas", "--fallback"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    assert!(text(&out).contains("fell back to fixpoint"));
    let x = fs::read_to_string(dir.path().join("X.out.json")).unwrap();
    assert!(!x.contains("\"int\": 2"));
}

#[test]
fn batch_writes_all_slots() {
    let dir = workspace(&["bench.json"]);
    let out = egdn(dir.path(), &["batch", "bench.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    for slot in ["cd", "asg", "corr", "itm", "itc", "ipt", "iptc", "ipm", "ctm", "ctc", "cpt", "cptc", "cpm"] {
        assert!(dir.path().join(format!("{slot}.out.json")).exists(), "{slot}");
    }
}

#[test]
fn bench_writes_one_row_per_update_and_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let out = egdn(
        dir.path(),
        &["bench", "--classes", "10", "--updates", "4", "--reps", "2", "--out", "bench.csv"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let csv = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "update,strategy,mean_ms,stddev_ms");
    assert_eq!(lines.len(), 1 + 4 * 2);
    assert!(lines[1].starts_with("1,incremental,"));
    assert!(lines[2].starts_with("1,batch,"));
}
