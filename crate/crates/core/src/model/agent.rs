//! The synthetic subject's generative model: Dirichlet priors over the
//! feedback likelihood and the transitions, preferences, initial beliefs and
//! habits.

use serde::{Deserialize, Serialize};

use super::process::{feedback_value, FeedbackPolarity, ProcessModel};
use super::space::{Factor, StateSpace};
use crate::belief::{
    discretize_gaussian, BinGrid, Categorical, ConditionalTensor, DirichletCounts,
    ExpectedLogRule,
};
use crate::env::TrueState;
use crate::error::{Error, Result};

/// Smallest admissible Dirichlet count.
pub const COUNT_FLOOR: f64 = 1e-16;

/// How the biased likelihood prior combines intensity and laterality into a
/// single expected feedback value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasedMean {
    /// `i * AsI(alpha)`.
    #[default]
    Product,
    /// `(i + AsI(alpha)) / 2`.
    Additive,
    /// `i`: feedback believed to track intensity alone.
    IntensityOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub c_a: f64,
    pub s_a: f64,
    /// Width of the believed feedback noise, in bin widths.
    pub sigma_model: f64,
    pub c_b: f64,
    pub s_b: f64,
    pub b_pre_intensity: f64,
    pub b_pre_orientation: f64,
    pub biased_mean: BiasedMean,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            c_a: 1.0,
            s_a: 100.0,
            sigma_model: 0.5,
            c_b: 1.0,
            s_b: 1.0,
            b_pre_intensity: 0.0,
            b_pre_orientation: 0.0,
            biased_mean: BiasedMean::Product,
        }
    }
}

impl PriorConfig {
    pub fn b_pre(&self, factor: Factor) -> f64 {
        match factor {
            Factor::Intensity => self.b_pre_intensity,
            Factor::Orientation => self.b_pre_orientation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("c_a", self.c_a),
            ("s_a", self.s_a),
            ("c_b", self.c_b),
            ("s_b", self.s_b),
            ("b_pre_intensity", self.b_pre_intensity),
            ("b_pre_orientation", self.b_pre_orientation),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if self.c_a + self.s_a <= 0.0 {
            return Err(Error::Config("c_a and s_a cannot both be zero".into()));
        }
        for f in Factor::ALL {
            if self.c_b + self.s_b + self.b_pre(f) <= 0.0 {
                return Err(Error::Config(format!(
                    "c_b, s_b and b_pre for {f:?} cannot all be zero"
                )));
            }
        }
        if !(self.sigma_model > 0.0) {
            return Err(Error::Config(format!(
                "sigma_model = {} must be > 0",
                self.sigma_model
            )));
        }
        Ok(())
    }
}

/// Agent-side settings: priors, preferences and planning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub prior: PriorConfig,
    /// Slope of the log-preferences over feedback levels.
    pub preference_scale: f64,
    /// Action precision.
    pub gamma: f64,
    pub horizon: usize,
    /// Observation branches below this predictive probability are not
    /// expanded during planning.
    pub prune_threshold: f64,
    pub novelty_a: bool,
    pub novelty_b: bool,
    pub learn_a: bool,
    pub learn_b: bool,
    pub eta_a: f64,
    pub eta_b: f64,
    pub expected_log: ExpectedLogRule,
    /// Reset beliefs to the initial-state prior at the start of each MI
    /// phase. When false, beliefs are carried over (without updating
    /// through rest).
    pub reset_beliefs: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            prior: PriorConfig::default(),
            preference_scale: 2.0,
            gamma: 16.0,
            horizon: 2,
            prune_threshold: 1.0 / 16.0,
            novelty_a: true,
            novelty_b: true,
            learn_a: true,
            learn_b: true,
            eta_a: 1.0,
            eta_b: 1.0,
            expected_log: ExpectedLogRule::Digamma,
            reset_beliefs: true,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if !(self.gamma >= 0.0) || !(self.preference_scale >= 0.0) {
            return Err(Error::Config("gamma and preference_scale must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.prune_threshold) {
            return Err(Error::Config("prune_threshold must be in [0, 1]".into()));
        }
        if !(self.eta_a >= 0.0) || !(self.eta_b >= 0.0) {
            return Err(Error::Config("learning rates must be >= 0".into()));
        }
        Ok(())
    }
}

/// Dirichlet prior over the feedback likelihood,
/// `a0[., i, alpha] = c_a + s_a * N(m(i, alpha), sigma_model)` on the grid.
pub fn build_prior_a(
    space: &StateSpace,
    grid: &BinGrid,
    prior: &PriorConfig,
    epsilon: f64,
    polarity: FeedbackPolarity,
) -> Result<DirichletCounts> {
    let top = space.n_intensity() - 1;
    let sigma = prior.sigma_model * grid.bin_width();
    let mut counts = Vec::with_capacity(grid.len() * space.n_joint());
    for j in 0..space.n_joint() {
        let (i, a) = space.split_joint(j);
        let intensity = space.intensity_values[i];
        // laterality of the orientation at full strength
        let lateral = feedback_value(space, TrueState::new(top, a), epsilon, polarity);
        let mean = biased_mean(prior.biased_mean, intensity, lateral);
        let shape = discretize_gaussian(mean, sigma, grid)?;
        counts.extend(
            shape
                .probs()
                .iter()
                .map(|p| (prior.c_a + prior.s_a * p).max(COUNT_FLOOR)),
        );
    }
    DirichletCounts::new(
        crate::belief::TableShape::new(grid.len(), &[space.n_intensity(), space.n_orientation()]),
        counts,
    )
}

fn biased_mean(rule: BiasedMean, intensity: f64, lateral: f64) -> f64 {
    match rule {
        BiasedMean::Product => intensity * lateral,
        BiasedMean::Additive => (intensity + lateral) / 2.0,
        BiasedMean::IntensityOnly => intensity,
    }
}

/// Dirichlet prior over one factor's transitions,
/// `b0 = c_b + s_b * Id + b_pre * B` for every action.
pub fn build_prior_b(b_true: &ConditionalTensor, c_b: f64, s_b: f64, b_pre: f64) -> Result<DirichletCounts> {
    let shape = b_true.shape().clone();
    let n = shape.outcomes;
    if shape.conditions.len() != 2 || shape.conditions[0] != n {
        return Err(Error::shape("[n x n x actions]", &shape));
    }
    let n_actions = shape.conditions[1];
    let mut counts = Vec::with_capacity(shape.len());
    for c in 0..shape.n_conditions() {
        let prev = c / n_actions;
        for (next, p) in b_true.slice(c).iter().enumerate() {
            let id = if next == prev { s_b } else { 0.0 };
            counts.push((c_b + id + b_pre * p).max(COUNT_FLOOR));
        }
    }
    DirichletCounts::new(shape, counts)
}

/// Log-preferences `scale * j`, shifted so the top level is zero.
pub fn build_preferences(n_levels: usize, scale: f64) -> Result<Vec<f64>> {
    if !(scale >= 0.0) || n_levels == 0 {
        return Err(Error::InvalidInput(format!(
            "preferences need scale >= 0 and n_levels >= 1 (scale={scale}, n={n_levels})"
        )));
    }
    let top = scale * (n_levels - 1) as f64;
    Ok((0..n_levels).map(|j| scale * j as f64 - top).collect())
}

/// The subject's model of the loop. Counts in `a` and `b` are owned by a
/// single run and mutated by learning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentModel {
    pub space: StateSpace,
    pub n_actions: usize,
    /// `[5 feedback x 4 intensity x 5 orientation]`, feedback modality only.
    pub a: DirichletCounts,
    /// Per factor, `[next x previous x action]`.
    pub b: [DirichletCounts; 2],
    /// Log-preferences over feedback levels.
    pub c: Vec<f64>,
    /// Initial-state belief per factor.
    pub d: [Categorical; 2],
    /// Habits over joint actions; `None` means uniform.
    pub e: Option<Categorical>,
    pub config: AgentConfig,
}

impl AgentModel {
    pub fn build(process: &ProcessModel, config: &AgentConfig) -> Result<Self> {
        config.validate()?;
        let space = process.space.clone();
        let a = build_prior_a(
            &space,
            &process.asi_grid,
            &config.prior,
            process.config.epsilon,
            process.config.feedback_polarity,
        )?;
        let b = [Factor::Intensity, Factor::Orientation].map(|f| {
            build_prior_b(
                process.transition(f),
                config.prior.c_b,
                config.prior.s_b,
                config.prior.b_pre(f),
            )
        });
        let [bi, bo] = b;
        let c = build_preferences(process.asi_grid.len(), config.preference_scale)?;
        let d = [
            Categorical::one_hot(space.n_intensity(), space.rest_intensity),
            Categorical::one_hot(space.n_orientation(), space.rest_orientation),
        ];
        Ok(Self {
            space,
            n_actions: process.actions.per_factor(),
            a,
            b: [bi?, bo?],
            c,
            d,
            e: None,
            config: config.clone(),
        })
    }

    pub fn n_outcomes(&self) -> usize {
        self.a.shape().outcomes
    }

    pub fn n_joint_actions(&self) -> usize {
        self.n_actions * self.n_actions
    }

    /// Outer product of the per-factor initial beliefs.
    pub fn d_joint(&self) -> Vec<f64> {
        let mut joint = Vec::with_capacity(self.space.n_joint());
        for pi in self.d[0].probs() {
            for pa in self.d[1].probs() {
                joint.push(pi * pa);
            }
        }
        joint
    }
}
