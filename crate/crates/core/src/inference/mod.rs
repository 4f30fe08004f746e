//! Perception, planning and learning for one synthetic subject.

mod efe;
mod learning;
mod planner;
mod state;

pub use efe::{expected_free_energy, log_preferences, transition_novelty, EfeTerms};
pub use learning::{update_a, update_b};
pub use planner::{Plan, PlanSettings, PlanningContext};
pub use state::{infer_states, infer_with_likelihood, predict_states, BeliefState};

use rand::Rng;

use crate::belief::Categorical;
use crate::error::Result;
use crate::model::{AgentModel, JointAction};

/// Draws a joint action from `dist` (intensity-major over
/// `n_per_factor x n_per_factor`).
pub fn select_action<R: Rng + ?Sized>(dist: &Categorical, n_per_factor: usize, rng: &mut R) -> JointAction {
    let k = dist.sample_with(rng.random::<f64>());
    JointAction::new(k / n_per_factor, k % n_per_factor)
}

/// Free energy of the latest belief update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateDiagnostics {
    pub vfe: f64,
}

/// A learning agent: its generative model plus current beliefs. Owned by a
/// single run.
#[derive(Debug, Clone)]
pub struct Agent {
    model: AgentModel,
    belief: BeliefState,
}

impl Agent {
    pub fn new(model: AgentModel) -> Self {
        let belief = BeliefState::from_marginals(&model.d[0], &model.d[1]);
        Self { model, belief }
    }

    pub fn model(&self) -> &AgentModel {
        &self.model
    }

    pub fn into_model(self) -> AgentModel {
        self.model
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    /// Called at the onset of each MI phase.
    pub fn begin_phase(&mut self) {
        if self.model.config.reset_beliefs {
            self.belief = BeliefState::from_marginals(&self.model.d[0], &self.model.d[1]);
        }
    }

    pub fn planning_context(&self) -> Result<PlanningContext> {
        let cfg = &self.model.config;
        PlanningContext::new(
            &self.model.a,
            &self.model.b,
            &self.model.c,
            self.model.e.as_ref(),
            PlanSettings {
                horizon: cfg.horizon,
                gamma: cfg.gamma,
                prune_threshold: cfg.prune_threshold,
                novelty_a: cfg.novelty_a,
                novelty_b: cfg.novelty_b,
            },
        )
    }

    pub fn plan(&self) -> Result<Plan> {
        self.planning_context()?.plan(&self.belief)
    }

    /// Predicts through the taken action, conditions on `obs`, then learns.
    pub fn observe(&mut self, action: JointAction, obs: Option<usize>) -> Result<UpdateDiagnostics> {
        let cfg = self.model.config.clone();
        let prior = predict_states(&self.belief, action, &self.model.b)?;
        let (posterior, vfe) = infer_states(&prior, obs, &self.model.a, cfg.expected_log)?;
        if let (true, Some(o)) = (cfg.learn_a, obs) {
            update_a(&mut self.model.a, o, &posterior, cfg.eta_a)?;
        }
        if cfg.learn_b {
            update_b(&mut self.model.b, action, &posterior, &self.belief, cfg.eta_b)?;
        }
        self.belief = posterior;
        Ok(UpdateDiagnostics { vfe })
    }
}
