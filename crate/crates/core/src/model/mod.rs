//! Both sides of the loop: the true process and the subject's generative
//! model.

pub mod agent;
pub mod process;
pub mod space;

pub use agent::{
    build_preferences, build_prior_a, build_prior_b, AgentConfig, AgentModel, BiasedMean,
    PriorConfig,
};
pub use process::{
    build_process_emissions, build_process_transitions, FeedbackPolarity, ProcessConfig,
    ProcessModel,
};
pub use space::{ActionKind, ActionSpace, Factor, JointAction, StateSpace};
