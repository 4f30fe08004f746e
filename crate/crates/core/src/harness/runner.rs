//! Executing agent runs and assembling their records.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{performance, Window};
use super::par::{default_workers, map_ordered};
use super::seed::{rng_for, seed_for};
use crate::env::{run_trial, Phase, StepRecord, TrialLog, TrialProtocol};
use crate::error::{Error, Result};
use crate::inference::Agent;
use crate::model::{AgentConfig, AgentModel, ProcessModel};

/// Identifies one agent run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunId {
    pub experiment: String,
    pub cell_i: usize,
    pub cell_a: usize,
    pub agent: usize,
    pub seed: u64,
}

/// Means over the MI steps of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub mean_intensity_idx: f64,
    pub mean_orientation_idx: f64,
    pub mean_noiseless_asi: f64,
    pub mean_feedback: f64,
    pub mean_vfe: f64,
    pub mean_g_risk: f64,
    pub mean_g_ambiguity: f64,
    pub mean_g_novelty: f64,
    /// Fraction of MI steps at the top intensity and rightmost orientation.
    pub target_occupancy: f64,
}

impl TrialSummary {
    pub fn from_log(trial: usize, log: &TrialLog, target: (usize, usize)) -> Self {
        let mut n = 0.0;
        let mut acc = [0.0f64; 9];
        for s in log.mi_steps() {
            n += 1.0;
            let efe = s.efe.unwrap_or_default();
            let vals = [
                s.state.intensity as f64,
                s.state.orientation as f64,
                s.outcome.noiseless,
                s.outcome.feedback.map_or(0.0, |f| f as f64),
                s.vfe.unwrap_or(0.0),
                efe.risk,
                efe.ambiguity,
                efe.novelty(),
                ((s.state.intensity, s.state.orientation) == target) as u8 as f64,
            ];
            for (a, v) in acc.iter_mut().zip(vals) {
                *a += v;
            }
        }
        let m = |k: usize| if n > 0.0 { acc[k] / n } else { 0.0 };
        Self {
            trial,
            mean_intensity_idx: m(0),
            mean_orientation_idx: m(1),
            mean_noiseless_asi: m(2),
            mean_feedback: m(3),
            mean_vfe: m(4),
            mean_g_risk: m(5),
            mean_g_ambiguity: m(6),
            mean_g_novelty: m(7),
            target_occupancy: m(8),
        }
    }
}

/// One step of the optional per-step trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub trial: usize,
    pub step: StepRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: RunId,
    pub trials: Vec<TrialSummary>,
    pub steps: Option<Vec<StepRow>>,
    /// Learned counts at the end of the run.
    pub final_a: Vec<f64>,
    pub final_b: [Vec<f64>; 2],
}

impl RunRecord {
    /// Mean of a per-trial quantity over the last `k` trials.
    pub fn tail_mean(&self, k: usize, f: impl Fn(&TrialSummary) -> f64) -> f64 {
        let n = self.trials.len();
        let tail = &self.trials[n.saturating_sub(k)..];
        tail.iter().map(&f).sum::<f64>() / tail.len() as f64
    }

    pub fn head_mean(&self, k: usize, f: impl Fn(&TrialSummary) -> f64) -> f64 {
        let head = &self.trials[..k.min(self.trials.len())];
        head.iter().map(&f).sum::<f64>() / head.len() as f64
    }
}

/// A run that did not complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub id: RunId,
    pub message: String,
}

/// Runs one agent for the whole protocol. The process is shared read-only.
pub fn run_agent(
    process: &ProcessModel,
    agent_cfg: &AgentConfig,
    protocol: &TrialProtocol,
    id: RunId,
    keep_steps: bool,
) -> Result<RunRecord> {
    let mut rng = rng_for(id.seed);
    let mut agent = Agent::new(AgentModel::build(process, agent_cfg)?);
    let mut state = process.initial;
    let target = (process.space.n_intensity() - 1, process.space.n_orientation() - 1);
    let mut trials = Vec::with_capacity(protocol.n_trials);
    let mut steps = keep_steps.then(Vec::new);
    for trial in 0..protocol.n_trials {
        let log = run_trial(&mut agent, process, protocol, &mut state, &mut rng)?;
        trials.push(TrialSummary::from_log(trial, &log, target));
        if let Some(out) = steps.as_mut() {
            out.extend(log.steps.iter().map(|s| StepRow { trial, step: *s }));
        }
    }
    let model = agent.into_model();
    Ok(RunRecord {
        id,
        trials,
        steps,
        final_a: model.a.counts().to_vec(),
        final_b: [model.b[0].counts().to_vec(), model.b[1].counts().to_vec()],
    })
}

/// A unit of work: one agent in one cell.
#[derive(Debug, Clone)]
struct Job {
    id: RunId,
    process: Arc<ProcessModel>,
    agent: Arc<AgentConfig>,
}

/// Results of a batch. Records and failures are sorted by run id.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BatchOutcome {
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
}

fn execute(jobs: Vec<Job>, protocol: &TrialProtocol, workers: usize, keep_steps: bool) -> BatchOutcome {
    let results = map_ordered(jobs, workers, |job| {
        let id = job.id.clone();
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            run_agent(&job.process, &job.agent, protocol, job.id, keep_steps)
        }));
        match outcome {
            Ok(Ok(record)) => Ok(record),
            Ok(Err(e)) => Err(RunFailure {
                id,
                message: e.to_string(),
            }),
            Err(panic) => Err(RunFailure {
                id,
                message: panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "worker panicked".into()),
            }),
        }
    });
    let mut out = BatchOutcome::default();
    for r in results {
        match r {
            Ok(rec) => out.records.push(rec),
            Err(f) => out.failures.push(f),
        }
    }
    out.records.sort_by(|a, b| a.id.cmp(&b.id));
    out.failures.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

fn workers(cfg: &ExperimentConfig, override_jobs: Option<usize>) -> usize {
    match override_jobs.unwrap_or(cfg.experiment.jobs) {
        0 => default_workers(),
        n => n,
    }
}

/// `n_agents` independent runs with the configured priors.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<BatchOutcome> {
    cfg.validate()?;
    let process = Arc::new(ProcessModel::standard(cfg.process.clone())?);
    let agent = Arc::new(cfg.agent.clone());
    let batch = (0..cfg.experiment.n_agents)
        .map(|k| Job {
            id: RunId {
                experiment: cfg.experiment.name.clone(),
                cell_i: 0,
                cell_a: 0,
                agent: k,
                seed: seed_for(cfg.experiment.master_seed, 0, k as u32),
            },
            process: Arc::clone(&process),
            agent: Arc::clone(&agent),
        })
        .collect();
    Ok(execute(batch, &cfg.protocol, workers(cfg, jobs), cfg.experiment.steps))
}

/// Experiment 1 shape: ten agents, ten trials, `b_pre = (1, 1)`,
/// `sigma_proc = 1.5`. `overrides` is applied to the preset.
pub fn run_experiment_familiar(overrides: impl FnOnce(&mut ExperimentConfig)) -> Result<BatchOutcome> {
    let mut cfg = ExperimentConfig::familiar();
    overrides(&mut cfg);
    run_experiment(&cfg, None)
}

/// Experiment 2 shape: ten agents, one hundred trials, `b_pre = (0.1, 0)`,
/// `sigma_proc = 0.5`.
pub fn run_experiment_naive(overrides: impl FnOnce(&mut ExperimentConfig)) -> Result<BatchOutcome> {
    let mut cfg = ExperimentConfig::naive();
    overrides(&mut cfg);
    run_experiment(&cfg, None)
}

/// Before / after performance matrices of a prior sweep. Rows follow the
/// intensity axis, columns the orientation axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridResult {
    pub intensity_axis: Vec<f64>,
    pub orientation_axis: Vec<f64>,
    pub before: Vec<Vec<f64>>,
    pub after: Vec<Vec<f64>>,
    /// Completed runs per cell.
    pub completed: Vec<Vec<usize>>,
    pub batch: BatchOutcome,
}

impl GridResult {
    pub fn failed_runs(&self) -> usize {
        self.batch.failures.len()
    }
}

/// Runs every cell of the prior grid and reduces each run to a before and an
/// after performance value. Cells with no completed run hold `NaN`.
pub fn run_grid(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<GridResult> {
    cfg.validate()?;
    let spec = &cfg.experiment.grid;
    let intensity_axis = spec.intensity.values();
    let orientation_axis = spec.orientation.values();
    let n_cols = orientation_axis.len();
    let process = Arc::new(ProcessModel::standard(cfg.process.clone())?);
    let mut batch = Vec::with_capacity(intensity_axis.len() * n_cols * cfg.experiment.n_agents);
    for (ci, bi) in intensity_axis.iter().enumerate() {
        for (ca, ba) in orientation_axis.iter().enumerate() {
            let mut agent = cfg.agent.clone();
            agent.prior.b_pre_intensity = *bi;
            agent.prior.b_pre_orientation = *ba;
            let agent = Arc::new(agent);
            let cell = (ci * n_cols + ca) as u32;
            for k in 0..cfg.experiment.n_agents {
                batch.push(Job {
                    id: RunId {
                        experiment: cfg.experiment.name.clone(),
                        cell_i: ci,
                        cell_a: ca,
                        agent: k,
                        seed: seed_for(cfg.experiment.master_seed, cell, k as u32),
                    },
                    process: Arc::clone(&process),
                    agent: Arc::clone(&agent),
                });
            }
        }
    }
    let outcome = execute(batch, &cfg.protocol, workers(cfg, jobs), cfg.experiment.steps);

    let rows = intensity_axis.len();
    let mut before = vec![vec![0.0; n_cols]; rows];
    let mut after = vec![vec![0.0; n_cols]; rows];
    let mut completed = vec![vec![0usize; n_cols]; rows];
    let window = cfg.experiment.window;
    let kind = cfg.experiment.performance;
    for rec in &outcome.records {
        let (r, c) = (rec.id.cell_i, rec.id.cell_a);
        before[r][c] += performance(rec, Window::First(window), kind)?;
        after[r][c] += performance(rec, Window::Last(window), kind)?;
        completed[r][c] += 1;
    }
    for r in 0..rows {
        for c in 0..n_cols {
            let n = completed[r][c] as f64;
            before[r][c] = if n > 0.0 { before[r][c] / n } else { f64::NAN };
            after[r][c] = if n > 0.0 { after[r][c] / n } else { f64::NAN };
        }
    }
    Ok(GridResult {
        intensity_axis,
        orientation_axis,
        before,
        after,
        completed,
        batch: outcome,
    })
}

/// Count of MI steps across a record's trials, for consistency checks.
pub fn mi_step_count(record: &RunRecord) -> Option<usize> {
    record
        .steps
        .as_ref()
        .map(|s| s.iter().filter(|r| r.step.phase == Phase::MotorImagery).count())
}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Self {
        Error::InvalidInput(format!("run {:?} failed: {}", f.id, f.message))
    }
}
