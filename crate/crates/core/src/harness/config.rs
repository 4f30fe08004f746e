//! Experiment configuration.
//!
//! A config file is a single TOML or JSON document with the sections
//! `process`, `agent`, `protocol` and `experiment`. Every section is
//! optional and falls back to its defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::TrialProtocol;
use crate::error::{Error, Result};
use crate::model::{AgentConfig, ProcessConfig};

/// Which quantity summarizes a run window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceKind {
    /// Mean noiseless feedback-axis asymmetry over MI steps.
    #[default]
    NoiselessAsymmetry,
    /// Mean feedback bin over MI steps, rescaled to `[-1, 1]`.
    FeedbackLevel,
    /// Fraction of MI steps at (high, R), rescaled to `[-1, 1]`.
    TargetOccupancy,
}

/// One axis of the prior grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps).map(|k| self.min + step * k as f64).collect()
    }
}

impl Default for GridAxis {
    fn default() -> Self {
        Self {
            min: 0.0,
            max: 2.0,
            steps: 21,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Values of `b_pre` for the intensity factor (matrix rows).
    pub intensity: GridAxis,
    /// Values of `b_pre` for the orientation factor (matrix columns).
    pub orientation: GridAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Label written to every output row.
    pub name: String,
    pub n_agents: usize,
    pub master_seed: u64,
    /// Trials in the before / after performance windows.
    pub window: usize,
    pub performance: PerformanceKind,
    pub grid: GridSpec,
    /// Worker threads; `0` picks the pool default.
    pub jobs: usize,
    /// Write the per-step trace.
    pub steps: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            n_agents: 10,
            master_seed: 0,
            window: 5,
            performance: PerformanceKind::NoiselessAsymmetry,
            grid: GridSpec::default(),
            jobs: 0,
            steps: false,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub process: ProcessConfig,
    pub agent: AgentConfig,
    pub protocol: TrialProtocol,
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    /// Agents already familiar with the task: informed transition priors on
    /// both factors and noisy but informative feedback.
    pub fn familiar() -> Self {
        let mut cfg = Self::default();
        cfg.experiment.name = "familiar".into();
        cfg.experiment.n_agents = 10;
        cfg.protocol.n_trials = 10;
        cfg.process.sigma_proc = 1.5;
        cfg.agent.prior.b_pre_intensity = 1.0;
        cfg.agent.prior.b_pre_orientation = 1.0;
        cfg
    }

    /// Agents with no knowledge of how to lateralize, weak knowledge of
    /// intensity and reliable feedback, over a long training.
    pub fn naive() -> Self {
        let mut cfg = Self::default();
        cfg.experiment.name = "naive".into();
        cfg.experiment.n_agents = 10;
        cfg.protocol.n_trials = 100;
        cfg.experiment.window = 10;
        cfg.process.sigma_proc = 0.5;
        cfg.agent.prior.b_pre_intensity = 0.1;
        cfg.agent.prior.b_pre_orientation = 0.0;
        cfg
    }

    /// The 21 x 21 prior sweep over `b_pre` in `[0, 2]^2` under very noisy
    /// feedback. Runs at horizon 1.
    pub fn grid() -> Self {
        let mut cfg = Self::default();
        cfg.experiment.name = "grid".into();
        cfg.experiment.n_agents = 10;
        cfg.protocol.n_trials = 40;
        cfg.process.sigma_proc = 1.5;
        cfg.agent.horizon = 1;
        cfg
    }

    /// The 5 x 5 reduction of [`Self::grid`].
    pub fn grid_reduced() -> Self {
        let mut cfg = Self::grid();
        cfg.experiment.name = "grid5".into();
        let axis = GridAxis {
            min: 0.0,
            max: 2.0,
            steps: 5,
        };
        cfg.experiment.grid = GridSpec {
            intensity: axis.clone(),
            orientation: axis,
        };
        cfg
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "familiar" => Some(Self::familiar()),
            "naive" => Some(Self::naive()),
            "grid" => Some(Self::grid()),
            "grid5" | "grid_reduced" => Some(Self::grid_reduced()),
            "default" | "custom" => Some(Self::default()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.process.validate()?;
        self.agent.validate()?;
        self.protocol.validate()?;
        let e = &self.experiment;
        if e.n_agents == 0 {
            return Err(Error::Config("n_agents must be >= 1".into()));
        }
        if e.grid.intensity.steps == 0 || e.grid.orientation.steps == 0 {
            return Err(Error::Config("grid resolution must be >= 1".into()));
        }
        for axis in [&e.grid.intensity, &e.grid.orientation] {
            if !(axis.min >= 0.0) || !(axis.max >= axis.min) {
                return Err(Error::Config(format!("invalid grid axis {axis:?}")));
            }
        }
        if e.window == 0 || 2 * e.window > self.protocol.n_trials {
            return Err(Error::Config(format!(
                "window of {} trials needs at least {} trials for disjoint before/after ranges",
                e.window,
                2 * e.window
            )));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }
}
