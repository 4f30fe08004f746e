//! The true BCI loop: emission tables for the asymmetry feedback and the
//! unobserved left-ERD channel, plus the per-factor transition tables.

use serde::{Deserialize, Serialize};

use super::space::{ActionKind, ActionSpace, Factor, StateSpace};
use crate::belief::{
    discretize_gaussian_with, BinGrid, Categorical, ConditionalTensor, Discretization,
    TableShape,
};
use crate::env::{asymmetry_index, erd_levels, TrueState};
use crate::error::{Error, Result};

/// Which lateralization the top feedback bin rewards.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackPolarity {
    /// Right-lateralized ERD (largest right ERD) maps to the top bin.
    #[default]
    Right,
    /// The raw `(L - R) / (L + R)` sign: left-lateralized maps to the top bin.
    Left,
}

impl FeedbackPolarity {
    /// Multiplier taking the raw asymmetry index onto the feedback axis.
    pub fn sign(self) -> f64 {
        match self {
            FeedbackPolarity::Right => -1.0,
            FeedbackPolarity::Left => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessConfig {
    /// Emission noise in units of one bin width of the outcome grid.
    pub sigma_proc: f64,
    pub p_effect: f64,
    pub p_decay: f64,
    /// Baseline ERD level.
    pub epsilon: f64,
    pub feedback_polarity: FeedbackPolarity,
    pub discretization: Discretization,
}

impl Default for ProcessConfig {
    fn default() -> Self {
        Self {
            sigma_proc: 1.5,
            p_effect: 0.99,
            p_decay: 0.1,
            epsilon: 0.01,
            feedback_polarity: FeedbackPolarity::Right,
            discretization: Discretization::Center,
        }
    }
}

impl ProcessConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {p} is not in [0, 1]")))
            }
        };
        prob("p_effect", self.p_effect)?;
        prob("p_decay", self.p_decay)?;
        if !(self.sigma_proc > 0.0) || !self.sigma_proc.is_finite() {
            return Err(Error::Config(format!(
                "sigma_proc = {} must be > 0",
                self.sigma_proc
            )));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!(
                "epsilon = {} must be > 0",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Feedback grid: asymmetry index in `[-1, 1]`, five bins.
pub fn asi_grid() -> BinGrid {
    BinGrid::equispaced(-1.0, 1.0, 5).expect("static grid")
}

/// Left-ERD grid: normalized ERD in `[0, 1]`, five bins.
pub fn lerd_grid() -> BinGrid {
    BinGrid::equispaced(0.0, 1.0, 5).expect("static grid")
}

/// Noiseless feedback-axis value of a state: the asymmetry index with the
/// configured polarity applied.
pub fn feedback_value(
    space: &StateSpace,
    state: TrueState,
    epsilon: f64,
    polarity: FeedbackPolarity,
) -> f64 {
    let (left, right) = erd_levels(state, space, epsilon);
    polarity.sign() * asymmetry_index(left, right).expect("epsilon > 0 keeps the sum positive")
}

/// Emission tables `[feedback x intensity x orientation]` for the asymmetry
/// and left-ERD modalities.
pub fn build_process_emissions(
    space: &StateSpace,
    asi: &BinGrid,
    lerd: &BinGrid,
    cfg: &ProcessConfig,
) -> Result<(ConditionalTensor, ConditionalTensor)> {
    let conds = [space.n_intensity(), space.n_orientation()];
    let asi_sigma = cfg.sigma_proc * asi.bin_width();
    let lerd_sigma = cfg.sigma_proc * lerd.bin_width();
    let asi_table = ConditionalTensor::from_slices(TableShape::new(asi.len(), &conds), |c| {
        let (i, a) = space.split_joint(c);
        let mean = feedback_value(space, TrueState::new(i, a), cfg.epsilon, cfg.feedback_polarity);
        discretize_gaussian_with(mean, asi_sigma, asi, cfg.discretization)
    })?;
    let lerd_table = ConditionalTensor::from_slices(TableShape::new(lerd.len(), &conds), |c| {
        let (i, a) = space.split_joint(c);
        let (left, _) = erd_levels(TrueState::new(i, a), space, cfg.epsilon);
        discretize_gaussian_with(left, lerd_sigma, lerd, cfg.discretization)
    })?;
    Ok((asi_table, lerd_table))
}

/// Transition table `[next x previous x action]` for one factor.
///
/// Effective actions move one level with probability `p_effect` and leave the
/// residual in place (at a boundary all mass stays). Neutral actions move one
/// level toward `rest` with probability `p_decay`; at `rest` they are the
/// identity.
pub fn build_process_transitions(
    n_levels: usize,
    rest: usize,
    actions: &ActionSpace,
    p_effect: f64,
    p_decay: f64,
) -> Result<ConditionalTensor> {
    if !(0.0..=1.0).contains(&p_effect) || !(0.0..=1.0).contains(&p_decay) {
        return Err(Error::Config(format!(
            "transition probabilities out of range: p_effect={p_effect}, p_decay={p_decay}"
        )));
    }
    let n_actions = actions.per_factor();
    let shape = TableShape::new(n_levels, &[n_levels, n_actions]);
    ConditionalTensor::from_slices(shape, |c| {
        let (prev, action) = (c / n_actions, c % n_actions);
        let (target, p) = match actions.kind(action) {
            ActionKind::Up => ((prev + 1).min(n_levels - 1), p_effect),
            ActionKind::Down => (prev.saturating_sub(1), p_effect),
            ActionKind::Neutral => {
                let t = match prev.cmp(&rest) {
                    std::cmp::Ordering::Less => prev + 1,
                    std::cmp::Ordering::Greater => prev - 1,
                    std::cmp::Ordering::Equal => prev,
                };
                (t, p_decay)
            }
        };
        let mut probs = vec![0.0; n_levels];
        if target == prev {
            probs[prev] = 1.0;
        } else {
            probs[target] = p;
            probs[prev] = 1.0 - p;
        }
        Categorical::new(probs)
    })
}

/// The environment side of the loop. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessModel {
    pub space: StateSpace,
    pub actions: ActionSpace,
    pub config: ProcessConfig,
    pub asi_grid: BinGrid,
    pub lerd_grid: BinGrid,
    /// `[5 feedback x 4 intensity x 5 orientation]`.
    pub asi: ConditionalTensor,
    /// `[5 levels x 4 intensity x 5 orientation]`, never shown to the agent.
    pub lerd: ConditionalTensor,
    /// Indexed by [`Factor::index`].
    pub transitions: [ConditionalTensor; 2],
    /// Noiseless feedback-axis value per joint state.
    pub noiseless_feedback: Vec<f64>,
    pub initial: TrueState,
}

impl ProcessModel {
    pub fn build(space: StateSpace, actions: ActionSpace, config: ProcessConfig) -> Result<Self> {
        space.validate()?;
        config.validate()?;
        let asi_grid = asi_grid();
        let lerd_grid = lerd_grid();
        let (asi, lerd) = build_process_emissions(&space, &asi_grid, &lerd_grid, &config)?;
        let transitions = [
            build_process_transitions(
                space.n_intensity(),
                space.rest_intensity,
                &actions,
                config.p_effect,
                config.p_decay,
            )?,
            build_process_transitions(
                space.n_orientation(),
                space.rest_orientation,
                &actions,
                config.p_effect,
                config.p_decay,
            )?,
        ];
        let noiseless_feedback = (0..space.n_joint())
            .map(|j| {
                let (i, a) = space.split_joint(j);
                feedback_value(&space, TrueState::new(i, a), config.epsilon, config.feedback_polarity)
            })
            .collect();
        let initial = TrueState::new(space.rest_intensity, space.rest_orientation);
        Ok(Self {
            space,
            actions,
            config,
            asi_grid,
            lerd_grid,
            asi,
            lerd,
            transitions,
            noiseless_feedback,
            initial,
        })
    }

    pub fn standard(config: ProcessConfig) -> Result<Self> {
        Self::build(StateSpace::standard(), ActionSpace::default(), config)
    }

    pub fn transition(&self, factor: Factor) -> &ConditionalTensor {
        &self.transitions[factor.index()]
    }

    /// `P(next | prev, action)` for one factor.
    pub fn transition_slice(&self, factor: Factor, prev: usize, action: usize) -> &[f64] {
        let t = self.transition(factor);
        t.slice(prev * self.actions.per_factor() + action)
    }
}
