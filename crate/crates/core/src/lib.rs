//! Closed-loop simulation of Active Inference agents learning to control a
//! motor-imagery neurofeedback BCI.
//!
//! The crate is layered bottom-up:
//!
//! - [`belief`]: categorical and Dirichlet primitives.
//! - [`model`]: the true process (emission and transition tables) and the
//!   subject's generative model (Dirichlet priors, preferences, habits).
//! - [`inference`]: exact state inference, expected free energy, tree-search
//!   planning and Dirichlet learning.
//! - [`env`]: the simulated BCI and the rest / motor-imagery trial protocol.
//! - [`harness`]: experiment configuration, seeding, parallel execution,
//!   metrics and CSV / JSON export.

pub mod belief;
pub mod env;
mod error;
pub mod harness;
pub mod inference;
pub mod model;

pub use error::{Error, Result};
