//! Output files of a batch.
//!
//! | file             | contents                                               |
//! |------------------|--------------------------------------------------------|
//! | `trials.csv`     | one row per (run, trial): MI-step means                |
//! | `steps.csv`      | one row per timestep, written only when requested      |
//! | `grid_before.csv`| mean first-window performance per prior cell (grid)    |
//! | `grid_after.csv` | mean last-window performance per prior cell (grid)     |
//! | `summary.json`   | config echo, aggregates, failures and wall time        |
//!
//! Rows are ordered by `(experiment, cell_i, cell_a, agent, trial[, t])`.
//! Floats are written in scientific notation with 17 significant digits,
//! which round-trips every `f64`, so identical runs produce byte-identical
//! files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{performance, Window};
use super::runner::{BatchOutcome, GridResult, RunFailure, RunRecord};
use crate::env::Phase;
use crate::error::{Error, Result};

pub const TRIALS_HEADER: [&str; 13] = [
    "experiment",
    "cell_i",
    "cell_a",
    "agent",
    "trial",
    "mean_intensity_idx",
    "mean_orientation_idx",
    "mean_noiseless_asi",
    "mean_feedback",
    "mean_vfe",
    "mean_G_risk",
    "mean_G_ambiguity",
    "mean_G_novelty",
];

pub const STEPS_HEADER: [&str; 19] = [
    "experiment",
    "cell_i",
    "cell_a",
    "agent",
    "trial",
    "phase",
    "t",
    "intensity",
    "orientation",
    "action_intensity",
    "action_orientation",
    "feedback",
    "l_erd",
    "noiseless_asi",
    "vfe",
    "G_risk",
    "G_ambiguity",
    "G_novelty",
    "G_total",
];

pub const TRIALS_FILE: &str = "trials.csv";
pub const STEPS_FILE: &str = "steps.csv";
pub const GRID_BEFORE_FILE: &str = "grid_before.csv";
pub const GRID_AFTER_FILE: &str = "grid_after.csv";
pub const SUMMARY_FILE: &str = "summary.json";

fn csv_err(e: csv::Error) -> Error {
    Error::Output(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Output(e.to_string()))
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn sorted(records: &[RunRecord]) -> Vec<&RunRecord> {
    let mut v: Vec<_> = records.iter().collect();
    v.sort_by(|a, b| a.id.cmp(&b.id));
    v
}

pub fn trials_csv(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIALS_HEADER).map_err(csv_err)?;
    for rec in sorted(records) {
        let id = &rec.id;
        for t in &rec.trials {
            w.write_record([
                id.experiment.clone(),
                id.cell_i.to_string(),
                id.cell_a.to_string(),
                id.agent.to_string(),
                t.trial.to_string(),
                num(t.mean_intensity_idx),
                num(t.mean_orientation_idx),
                num(t.mean_noiseless_asi),
                num(t.mean_feedback),
                num(t.mean_vfe),
                num(t.mean_g_risk),
                num(t.mean_g_ambiguity),
                num(t.mean_g_novelty),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// Per-step trace of every record that kept one. Missing values are empty.
pub fn steps_csv(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(STEPS_HEADER).map_err(csv_err)?;
    for rec in sorted(records) {
        let id = &rec.id;
        for row in rec.steps.iter().flatten() {
            let s = &row.step;
            let phase = match s.phase {
                Phase::Rest => "rest",
                Phase::MotorImagery => "mi",
            };
            w.write_record([
                id.experiment.clone(),
                id.cell_i.to_string(),
                id.cell_a.to_string(),
                id.agent.to_string(),
                row.trial.to_string(),
                phase.to_string(),
                s.t.to_string(),
                s.state.intensity.to_string(),
                s.state.orientation.to_string(),
                opt(s.action.map(|a| a.intensity)),
                opt(s.action.map(|a| a.orientation)),
                opt(s.outcome.feedback),
                s.outcome.l_erd.to_string(),
                num(s.outcome.noiseless),
                opt(s.vfe.map(num)),
                opt(s.efe.map(|e| num(e.risk))),
                opt(s.efe.map(|e| num(e.ambiguity))),
                opt(s.efe.map(|e| num(e.novelty()))),
                opt(s.efe.map(|e| num(e.total()))),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// A matrix with the orientation axis as header and the intensity axis as
/// first column. Empty cells are written as `NaN`.
pub fn grid_csv(intensity_axis: &[f64], orientation_axis: &[f64], m: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["b_pre_intensity\\b_pre_orientation".to_string()];
    header.extend(orientation_axis.iter().map(|&v| num(v)));
    w.write_record(&header).map_err(csv_err)?;
    for (bi, row) in intensity_axis.iter().zip(m) {
        let mut rec = vec![num(*bi)];
        rec.extend(row.iter().map(|&v| num(v)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w)
}

/// How a batch was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Grid,
}

/// Per-trial-index means across agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialAggregate {
    pub trial: usize,
    pub n: usize,
    pub mean_intensity_idx: f64,
    pub mean_orientation_idx: f64,
    pub mean_noiseless_asi: f64,
    pub mean_feedback: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub runs: usize,
    pub per_trial: Vec<TrialAggregate>,
    /// Mean first-window performance over runs.
    pub performance_before: f64,
    /// Mean last-window performance over runs.
    pub performance_after: f64,
    /// Runs whose last window beats their first window.
    pub improved_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub intensity_axis: Vec<f64>,
    pub orientation_axis: Vec<f64>,
    pub before: Vec<Vec<f64>>,
    pub after: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: Mode,
    pub config: ExperimentConfig,
    pub aggregates: Aggregates,
    pub grid: Option<GridSummary>,
    pub failed: usize,
    pub failures: Vec<RunFailure>,
    pub wall_time_s: f64,
    pub version: String,
}

pub fn aggregate(cfg: &ExperimentConfig, records: &[RunRecord]) -> Result<Aggregates> {
    let n_trials = records.iter().map(|r| r.trials.len()).max().unwrap_or(0);
    let mut per_trial = Vec::with_capacity(n_trials);
    for k in 0..n_trials {
        let rows: Vec<_> = records.iter().filter_map(|r| r.trials.get(k)).collect();
        let n = rows.len();
        let mean = |f: &dyn Fn(&super::runner::TrialSummary) -> f64| {
            rows.iter().map(|t| f(t)).sum::<f64>() / n as f64
        };
        per_trial.push(TrialAggregate {
            trial: k,
            n,
            mean_intensity_idx: mean(&|t| t.mean_intensity_idx),
            mean_orientation_idx: mean(&|t| t.mean_orientation_idx),
            mean_noiseless_asi: mean(&|t| t.mean_noiseless_asi),
            mean_feedback: mean(&|t| t.mean_feedback),
        });
    }
    let window = cfg.experiment.window;
    let kind = cfg.experiment.performance;
    let (mut before, mut after, mut improved) = (0.0, 0.0, 0);
    for r in records {
        let b = performance(r, Window::First(window), kind)?;
        let a = performance(r, Window::Last(window), kind)?;
        before += b;
        after += a;
        improved += usize::from(a > b);
    }
    let n = records.len().max(1) as f64;
    Ok(Aggregates {
        runs: records.len(),
        per_trial,
        performance_before: before / n,
        performance_after: after / n,
        improved_runs: improved,
    })
}

pub fn summarize(
    mode: Mode,
    cfg: &ExperimentConfig,
    batch: &BatchOutcome,
    grid: Option<&GridResult>,
    wall_time_s: f64,
) -> Result<Summary> {
    Ok(Summary {
        mode,
        config: cfg.clone(),
        aggregates: aggregate(cfg, &batch.records)?,
        grid: grid.map(|g| GridSummary {
            intensity_axis: g.intensity_axis.clone(),
            orientation_axis: g.orientation_axis.clone(),
            before: g.before.clone(),
            after: g.after.clone(),
        }),
        failed: batch.failures.len(),
        failures: batch.failures.clone(),
        wall_time_s,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes every output of a batch into `dir`, creating it if needed, and
/// returns the written paths.
pub fn write_outputs(dir: &Path, summary: &Summary, batch: &BatchOutcome, grid: Option<&GridResult>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = vec![write(dir.join(TRIALS_FILE), &trials_csv(&batch.records)?)?];
    if batch.records.iter().any(|r| r.steps.is_some()) {
        written.push(write(dir.join(STEPS_FILE), &steps_csv(&batch.records)?)?);
    }
    if let Some(g) = grid {
        written.push(write(
            dir.join(GRID_BEFORE_FILE),
            &grid_csv(&g.intensity_axis, &g.orientation_axis, &g.before)?,
        )?);
        written.push(write(
            dir.join(GRID_AFTER_FILE),
            &grid_csv(&g.intensity_axis, &g.orientation_axis, &g.after)?,
        )?);
    }
    let json = serde_json::to_string_pretty(summary).map_err(|e| Error::Output(e.to_string()))?;
    written.push(write(dir.join(SUMMARY_FILE), &json)?);
    Ok(written)
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
