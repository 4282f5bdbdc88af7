//! Multi-trial execution and aggregation into `summary.csv`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use npenas_core::evolve::{self, Algorithm, RunResult};
use npenas_core::stats;
use npenas_core::{FitnessOracle, SearchSpace};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AlgoEntry, AlgoSpec, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::record::{write_atomic, ConfigLine, TrialFile};

pub const SUMMARY_FILE: &str = "summary.csv";

/// Runs one algorithm for one seed.
pub fn run_algorithm(space: &SearchSpace, oracle: &FitnessOracle, entry: &AlgoEntry, seed: u64) -> RunResult {
    match (&entry.spec, entry.spec.algorithm(seed)) {
        (_, Algorithm::Npenas(cfg)) => evolve::npenas(space, oracle, &cfg),
        (AlgoSpec::Ea { budget, k, n0 }, _) => evolve::ea_fanout(space, oracle, *budget, *k, *n0, seed),
        (spec, _) => evolve::random_search(space, oracle, spec.budget(), seed),
    }
}

pub fn trial_path(out: &Path, label: &str, trial: usize) -> PathBuf {
    out.join("runs").join(label).join(format!("trial_{trial:04}.jsonl"))
}

/// Executes one (algorithm, trial) cell and writes its file. Returns the
/// error message when the run failed (the partial record is still written).
fn run_cell(
    cfg: &ExperimentConfig,
    space: &SearchSpace,
    oracle: &FitnessOracle,
    entry: &AlgoEntry,
    trial: usize,
) -> CliResult<Option<String>> {
    let seed = cfg.trial_seed(trial);
    let start = Instant::now();
    let (mut run, error) = match run_algorithm(space, oracle, entry, seed) {
        Ok(r) => (r, None),
        Err(f) => {
            let msg = f.to_string();
            (f.partial, Some(msg))
        }
    };
    if cfg.record_wall_time {
        run.wall_seconds = Some(start.elapsed().as_secs_f64());
    }
    let label = entry.label();
    let line = ConfigLine { name: label.clone(), trial, seed, budget: entry.spec.budget(), spec: entry.spec.clone() };
    TrialFile::from_run(line, &run, error.clone()).write(&trial_path(&cfg.out, &label, trial))?;
    Ok(error.map(|e| format!("{label} trial {trial}: {e}")))
}

/// Runs every (algorithm × trial) cell on `jobs` threads, then aggregates.
/// Fails with a runtime error after all cells finish if any trial failed.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> CliResult<Vec<SummaryRow>> {
    let (space, oracle) = cfg.space.load()?;
    let cells: Vec<(usize, usize)> =
        (0..cfg.algorithms.len()).flat_map(|a| (0..cfg.trials).map(move |t| (a, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let outcomes: Vec<CliResult<Option<String>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(a, t)| run_cell(cfg, &space, &oracle, &cfg.algorithms[a], t))
            .collect()
    });
    let mut failures = Vec::new();
    for o in outcomes {
        if let Some(msg) = o? {
            failures.push(msg);
        }
    }
    let rows = aggregate_dir(cfg)?;
    write_summary(&cfg.out.join(SUMMARY_FILE), &rows)?;
    if !failures.is_empty() {
        return Err(CliError::Runtime(format!("{} trial(s) failed; first: {}", failures.len(), failures[0])));
    }
    Ok(rows)
}

/// One row of the aggregate table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algo: String,
    pub queries: usize,
    pub mean_test_err: f64,
    pub p30: f64,
    pub p70: f64,
    pub trials: usize,
}

/// Best-so-far test error of every trial at each checkpoint. Trials whose
/// trace stops early (failures) drop out of later checkpoints; mean and
/// percentiles always share one trial set.
pub fn aggregate(label: &str, curves: &[Vec<f64>], checkpoints: &[usize]) -> CliResult<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for &q in checkpoints {
        let vals: Vec<f64> = curves.iter().filter_map(|c| q.checked_sub(1).and_then(|i| c.get(i)).copied()).collect();
        if vals.is_empty() {
            continue;
        }
        rows.push(SummaryRow {
            algo: label.into(),
            queries: q,
            mean_test_err: stats::mean(&vals)?,
            p30: stats::percentile(&vals, 30.0)?,
            p70: stats::percentile(&vals, 70.0)?,
            trials: vals.len(),
        });
    }
    Ok(rows)
}

/// Reads every trial file named by the config and recomputes the table.
pub fn aggregate_dir(cfg: &ExperimentConfig) -> CliResult<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for entry in &cfg.algorithms {
        let label = entry.label();
        let mut curves = Vec::with_capacity(cfg.trials);
        for t in 0..cfg.trials {
            let path = trial_path(&cfg.out, &label, t);
            if !path.exists() {
                continue;
            }
            curves.push(TrialFile::load(&path)?.summary.trace_test_err);
        }
        rows.extend(aggregate(&label, &curves, &cfg.checkpoints(entry.spec.budget()))?);
    }
    Ok(rows)
}

pub fn render_summary(rows: &[SummaryRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record(["algo", "queries", "mean_test_err", "p30", "p70", "trials"])
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> CliResult<()> {
    write_atomic(path, &render_summary(rows)?)
}
