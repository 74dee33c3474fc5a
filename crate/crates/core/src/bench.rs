//! Timing harness: repeated attribute-add updates on the bundled bench
//! network, processed incrementally and by full recomputation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::fixtures::{attribute_update, bench_spec, synthetic_cd};
use crate::io::SpecError;
use crate::model::{Content, TypedGraph};
use crate::network::{Egdn, NetworkError, Valuation};
use crate::scheduler::{batch_execute, execute, ExecError, ExecOptions, ExecutionReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchStrategy {
    Incremental,
    Batch,
}

impl fmt::Display for BenchStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchStrategy::Incremental => "incremental",
            BenchStrategy::Batch => "batch",
        })
    }
}

impl FromStr for BenchStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "incremental" => Ok(BenchStrategy::Incremental),
            "batch" => Ok(BenchStrategy::Batch),
            _ => Err(format!("unknown bench strategy `{s}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Initial class diagram; `None` uses the synthetic generator.
    pub base: Option<TypedGraph>,
    pub packages: usize,
    pub classes_per_package: usize,
    pub attributes: usize,
    /// At least 1.
    pub updates: usize,
    pub repetitions: usize,
    pub strategies: Vec<BenchStrategy>,
}

impl BenchConfig {
    /// About `classes` classes spread over packages of at most 50.
    pub fn with_classes(classes: usize) -> Self {
        let packages = classes.div_ceil(50).max(1);
        BenchConfig {
            base: None,
            packages,
            classes_per_package: classes.div_ceil(packages).max(1),
            attributes: 2,
            updates: 30,
            repetitions: 10,
            strategies: vec![BenchStrategy::Incremental, BenchStrategy::Batch],
        }
    }

    pub fn base_model(&self) -> TypedGraph {
        self.base.clone().unwrap_or_else(|| {
            synthetic_cd(self.packages, self.classes_per_package, self.attributes)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub update: usize,
    pub strategy: BenchStrategy,
    pub mean_ms: f64,
    pub stddev_ms: f64,
    /// Robust to a single slow repetition; not part of the CSV.
    #[serde(skip)]
    pub median_ms: f64,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("bench fixture: {0}")]
    Fixture(#[from] SpecError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("update {update}: run ended with {outcome}")]
    Incomplete { update: usize, outcome: String },
    #[error("updates must be at least 1")]
    NoUpdates,
}

/// Sample mean and standard deviation.
pub fn mean_stddev(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Median of the samples; 0 when empty.
pub fn median(samples: &[f64]) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    match xs.len() {
        0 => 0.0,
        n if n % 2 == 1 => xs[n / 2],
        n => (xs[n / 2 - 1] + xs[n / 2]) / 2.0,
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn check(update: usize, report: &ExecutionReport) -> Result<(), BenchError> {
    if report.completed() {
        Ok(())
    } else {
        Err(BenchError::Incomplete {
            update,
            outcome: report.outcome.to_string(),
        })
    }
}

/// Runs the benchmark; `progress` sees each row as soon as it is measured.
pub fn run_bench(
    cfg: &BenchConfig,
    mut progress: impl FnMut(&BenchRow),
) -> Result<Vec<BenchRow>, BenchError> {
    if cfg.updates == 0 {
        return Err(BenchError::NoUpdates);
    }
    let opts = ExecOptions::default();
    let (fresh, _) = bench_spec().build()?;
    let mut net: Egdn = fresh.clone();
    let base = BTreeMap::from([("cd".to_string(), Content::Model(cfg.base_model()))]);
    let (mut val, report): (Valuation, _) = batch_execute(&mut net, &base, &opts)?;
    check(0, &report)?;
    let reps = cfg.repetitions.max(1);
    let mut rows = Vec::new();
    for update in 1..=cfg.updates {
        let edit = attribute_update(val.model("cd"), update);
        let mut next = None;
        for strategy in &cfg.strategies {
            let mut samples = Vec::with_capacity(reps);
            match strategy {
                BenchStrategy::Incremental => {
                    for _ in 0..reps {
                        let (mut n, mut v) = (net.clone(), val.clone());
                        let start = Instant::now();
                        n.record_edit(&mut v, "cd", &edit, true)?;
                        let report = execute(&mut n, &mut v, &opts)?;
                        samples.push(ms(start));
                        check(update, &report)?;
                        next = Some((n, v));
                    }
                }
                BenchStrategy::Batch => {
                    let cd = val.content("cd").applied(&edit).map_err(|source| {
                        NetworkError::Content {
                            slot: "cd".into(),
                            source,
                        }
                    })?;
                    let base = BTreeMap::from([("cd".to_string(), cd)]);
                    for _ in 0..reps {
                        let mut n = fresh.clone();
                        let start = Instant::now();
                        let (v, report) = batch_execute(&mut n, &base, &opts)?;
                        samples.push(ms(start));
                        check(update, &report)?;
                        if next.is_none() {
                            next = Some((n, v));
                        }
                    }
                }
            }
            let (mean_ms, stddev_ms) = mean_stddev(&samples);
            let row = BenchRow {
                update,
                strategy: *strategy,
                mean_ms,
                stddev_ms,
                median_ms: median(&samples),
            };
            progress(&row);
            rows.push(row);
        }
        match next {
            Some((n, v)) => (net, val) = (n, v),
            None => {
                net.record_edit(&mut val, "cd", &edit, true)?;
                let report = execute(&mut net, &mut val, &opts)?;
                check(update, &report)?;
            }
        }
    }
    Ok(rows)
}

/// CSV with header `update,strategy,mean_ms,stddev_ms`.
pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_bench_has_one_row_per_update_and_strategy() {
        let mut cfg = BenchConfig::with_classes(6);
        cfg.updates = 3;
        cfg.repetitions = 2;
        let rows = run_bench(&cfg, |_| {}).unwrap();
        assert_eq!(rows.len(), 6);
        let csv = to_csv(&rows);
        assert!(csv.starts_with("update,strategy,mean_ms,stddev_ms\n1,incremental,"));
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn stddev_is_sample_stddev() {
        let (m, s) = mean_stddev(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn median_ignores_one_outlier() {
        assert_eq!(median(&[10.0, 900.0, 11.0]), 11.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[]), 0.0);
    }
}
