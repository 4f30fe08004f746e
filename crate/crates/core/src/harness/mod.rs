//! Experiment configuration, seeding, batch execution and export.

pub mod config;
pub mod export;
pub mod metrics;
pub mod par;
pub mod runner;
pub mod seed;

pub use config::{ExperimentConfig, ExperimentSection, GridAxis, GridSpec, PerformanceKind};
pub use metrics::{performance, trial_score, Window};
pub use runner::{
    run_agent, run_experiment, run_experiment_familiar, run_experiment_naive, run_grid, BatchOutcome,
    GridResult, RunFailure, RunId, RunRecord, StepRow, TrialSummary,
};
