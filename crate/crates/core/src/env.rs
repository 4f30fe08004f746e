//! The simulated BCI: hidden ERD state, feedback emission and the
//! rest / motor-imagery trial protocol.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::sample_index;
use crate::error::{Error, Result};
use crate::inference::{select_action, Agent, EfeTerms};
use crate::model::{Factor, JointAction, ProcessModel, StateSpace};

/// Hidden (intensity, orientation) level indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrueState {
    pub intensity: usize,
    pub orientation: usize,
}

impl TrueState {
    pub fn new(intensity: usize, orientation: usize) -> Self {
        Self {
            intensity,
            orientation,
        }
    }

    pub fn get(&self, factor: Factor) -> usize {
        match factor {
            Factor::Intensity => self.intensity,
            Factor::Orientation => self.orientation,
        }
    }
}

/// Left and right ERD strengths, `i cos(alpha) + eps` and `i sin(alpha) + eps`.
pub fn erd_levels(state: TrueState, space: &StateSpace, epsilon: f64) -> (f64, f64) {
    let i = space.intensity_values[state.intensity];
    let alpha = space.orientation_angles[state.orientation];
    (i * alpha.cos() + epsilon, i * alpha.sin() + epsilon)
}

/// `(L - R) / (L + R)`.
pub fn asymmetry_index(erd_left: f64, erd_right: f64) -> Result<f64> {
    let total = erd_left + erd_right;
    if !(total > 0.0) {
        return Err(Error::DegenerateState(format!(
            "ERD sum {total} is not positive"
        )));
    }
    Ok((erd_left - erd_right) / total)
}

/// Samples each factor independently from its transition slice.
pub fn step_process<R: Rng + ?Sized>(
    state: TrueState,
    action: JointAction,
    process: &ProcessModel,
    rng: &mut R,
) -> TrueState {
    let intensity = sample_index(
        process.transition_slice(Factor::Intensity, state.intensity, action.intensity),
        rng.random(),
    );
    let orientation = sample_index(
        process.transition_slice(Factor::Orientation, state.orientation, action.orientation),
        rng.random(),
    );
    TrueState::new(intensity, orientation)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Rest,
    MotorImagery,
}

/// What the environment produces at one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    /// Feedback bin, present only during motor imagery.
    pub feedback: Option<usize>,
    /// Left-ERD bin; logged, never shown to the agent.
    pub l_erd: usize,
    /// Noiseless feedback-axis value of the emitting state.
    pub noiseless: f64,
}

pub fn emit<R: Rng + ?Sized>(state: TrueState, process: &ProcessModel, phase: Phase, rng: &mut R) -> StepOutcome {
    let joint = process.space.joint_index(state.intensity, state.orientation);
    let feedback = match phase {
        Phase::MotorImagery => Some(sample_index(process.asi.slice(joint), rng.random())),
        Phase::Rest => None,
    };
    let l_erd = sample_index(process.lerd.slice(joint), rng.random());
    StepOutcome {
        feedback,
        l_erd,
        noiseless: process.noiseless_feedback[joint],
    }
}

/// Timesteps per phase. One timestep stands for two EEG feedback updates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialProtocol {
    pub rest_steps: usize,
    pub mi_steps: usize,
    pub n_trials: usize,
}

impl Default for TrialProtocol {
    fn default() -> Self {
        Self {
            rest_steps: 40,
            mi_steps: 40,
            n_trials: 10,
        }
    }
}

impl TrialProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be >= 1".into()));
        }
        Ok(())
    }
}

/// Anything that can sit in the loop during motor imagery.
pub trait Subject {
    fn begin_phase(&mut self);

    /// Picks the next action, with the one-step free-energy terms that
    /// motivated it when available.
    fn act(&mut self, rng: &mut dyn rand::RngCore) -> Result<(JointAction, Option<EfeTerms>)>;

    /// Returns the variational free energy of the update, when defined.
    fn observe(&mut self, action: JointAction, feedback: Option<usize>) -> Result<Option<f64>>;

    /// State and action cardinalities `(levels per factor, actions per factor)`.
    fn dims(&self) -> ([usize; 2], usize);
}

impl Subject for Agent {
    fn begin_phase(&mut self) {
        Agent::begin_phase(self)
    }

    fn act(&mut self, rng: &mut dyn rand::RngCore) -> Result<(JointAction, Option<EfeTerms>)> {
        let plan = self.plan()?;
        let n = self.model().n_actions;
        let action = select_action(&plan.distribution, n, rng);
        let terms = plan.step_terms[action.intensity * n + action.orientation];
        Ok((action, Some(terms)))
    }

    fn observe(&mut self, action: JointAction, feedback: Option<usize>) -> Result<Option<f64>> {
        Ok(Some(Agent::observe(self, action, feedback)?.vfe))
    }

    fn dims(&self) -> ([usize; 2], usize) {
        let m = self.model();
        ([m.space.n_intensity(), m.space.n_orientation()], m.n_actions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub phase: Phase,
    /// Step index within the trial.
    pub t: usize,
    /// State after the transition of this step.
    pub state: TrueState,
    pub action: Option<JointAction>,
    pub outcome: StepOutcome,
    pub vfe: Option<f64>,
    pub efe: Option<EfeTerms>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub steps: Vec<StepRecord>,
}

impl TrialLog {
    pub fn mi_steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.steps.iter().filter(|s| s.phase == Phase::MotorImagery)
    }
}

/// Runs one rest phase followed by one motor-imagery phase. `state` carries
/// the hidden state across trials.
pub fn run_trial<S, R>(
    subject: &mut S,
    process: &ProcessModel,
    protocol: &TrialProtocol,
    state: &mut TrueState,
    rng: &mut R,
) -> Result<TrialLog>
where
    S: Subject + ?Sized,
    R: rand::RngCore,
{
    let (levels, actions) = subject.dims();
    if levels != [process.space.n_intensity(), process.space.n_orientation()]
        || actions != process.actions.per_factor()
    {
        return Err(Error::Config(format!(
            "subject dims {levels:?}/{actions} do not match the process"
        )));
    }
    let mut steps = Vec::with_capacity(protocol.rest_steps + protocol.mi_steps);
    let neutral = process.actions.rest_action();
    let rest_action = JointAction::new(neutral, neutral);
    for t in 0..protocol.rest_steps {
        *state = step_process(*state, rest_action, process, rng);
        let outcome = emit(*state, process, Phase::Rest, rng);
        steps.push(StepRecord {
            phase: Phase::Rest,
            t,
            state: *state,
            action: None,
            outcome,
            vfe: None,
            efe: None,
        });
    }
    subject.begin_phase();
    for k in 0..protocol.mi_steps {
        let (action, efe) = subject.act(rng)?;
        *state = step_process(*state, action, process, rng);
        let outcome = emit(*state, process, Phase::MotorImagery, rng);
        let vfe = subject.observe(action, outcome.feedback)?;
        steps.push(StepRecord {
            phase: Phase::MotorImagery,
            t: protocol.rest_steps + k,
            state: *state,
            action: Some(action),
            outcome,
            vfe,
            efe,
        });
    }
    Ok(TrialLog { steps })
}
