//! Discrete active inference: generative models, exact inference, expected
//! free energy planning, and a T-Maze experiment harness.
//!
//! ```
//! use actinf::envs::tmaze::{tmaze_model, TMazeParams, OBS_MIDDLE};
//! use actinf::{History, ObjectiveKind, Planner};
//!
//! let model = tmaze_model(&TMazeParams::default());
//! let plan = Planner::new(ObjectiveKind::ExpectedFreeEnergy, 1.0)
//!     .plan(&model, &History::initial(OBS_MIDDLE))
//!     .unwrap();
//! assert_eq!(plan.evaluations.len(), 16);
//! assert!((plan.action_marginal.sum() - 1.0).abs() < 1e-12);
//! ```

pub mod distributions;
pub mod envs;
pub mod error;
pub mod files;
pub mod harness;
pub mod history;
pub mod inference;
pub mod model;
pub mod planning;
pub mod report;

pub use distributions::Categorical;
pub use envs::{build_environment, Environment, EnvironmentConfig};
pub use error::{
    DistributionError, EnvError, HarnessError, InferenceError, PlanningError, ValidationReport, Violation,
    ViolationKind,
};
pub use harness::{run_experiment, run_trial, AgentConfig, BeliefTrace, Experiment, ExperimentConfig, TrialRecord};
pub use history::{History, Policy};
pub use inference::{enumerate_posterior, filter_and_smooth, preferential_inference, MarginalBeliefs};
pub use model::{validate_model, GenerativeModel, ModelDescription};
pub use planning::{EfeBreakdown, ObjectiveKind, Planner, PolicyPosterior, SelectionMode};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/free_energy.md")]
    mod free_energy {}
    #[doc = include_str!("../../../book/src/tmaze.md")]
    mod tmaze {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
