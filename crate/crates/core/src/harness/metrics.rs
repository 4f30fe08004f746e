//! Reduction of a run to a scalar performance value.

use super::config::PerformanceKind;
use super::runner::{RunRecord, TrialSummary};
use crate::error::{Error, Result};

/// A range of trials at either end of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    First(usize),
    Last(usize),
}

impl Window {
    pub fn select<'a>(&self, trials: &'a [TrialSummary]) -> Result<&'a [TrialSummary]> {
        let (k, n) = match *self {
            Window::First(k) | Window::Last(k) => (k, trials.len()),
        };
        if k == 0 || k > n {
            return Err(Error::InvalidInput(format!("window of {k} trials over a run of {n}")));
        }
        Ok(match *self {
            Window::First(_) => &trials[..k],
            Window::Last(_) => &trials[n - k..],
        })
    }
}

/// Per-trial value in `[-1, 1]`; higher is better.
pub fn trial_score(t: &TrialSummary, kind: PerformanceKind) -> f64 {
    let raw = match kind {
        PerformanceKind::NoiselessAsymmetry => t.mean_noiseless_asi,
        PerformanceKind::FeedbackLevel => t.mean_feedback / 2.0 - 1.0,
        PerformanceKind::TargetOccupancy => 2.0 * t.target_occupancy - 1.0,
    };
    raw.clamp(-1.0, 1.0)
}

/// Mean trial score over a window.
pub fn performance(record: &RunRecord, window: Window, kind: PerformanceKind) -> Result<f64> {
    let trials = window.select(&record.trials)?;
    let sum: f64 = trials.iter().map(|t| trial_score(t, kind)).sum();
    Ok(sum / trials.len() as f64)
}
