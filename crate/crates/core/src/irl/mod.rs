//! Inverse RL over reward-machine product models.
//!
//! [`smirl_train`] learns a motif from demonstrations, then runs MaxEnt IRL on
//! the product of the environment and that motif. [`maxent_baseline_train`]
//! is the same learner on the one-state machine and
//! [`apprenticeship_train`] is max-margin feature matching.

mod apprentice;
mod eval;
mod maxent;
mod soft;
mod svf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expert::ExpertError;
use crate::motif::{LearnedMotif, MotifError};
use crate::rm::{RewardMachine, RmError};

pub use apprentice::{
    apprenticeship_train, feature_expectations, max_margin_weights, min_norm_point, td_q_learning,
    ApprenticeshipConfig, MaxMargin,
};
pub use eval::{evaluate_policy, ActionSelection, LearnedPolicy};
pub use maxent::{
    maxent_baseline_train, maxent_on_motif, plan_from_weights, smirl_train, smirl_with_motif, IrlConfig, Optimizer,
    SvfMethod,
};
pub use soft::{log_likelihood, soft_value_iteration, PlanningMode, SoftConfig, SoftPolicy};
pub use svf::{expert_svf, maxent_gradient, policy_svf, policy_svf_monte_carlo, SvfTable, ThetaParams};

#[derive(Debug, Error)]
pub enum IrlError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no demonstrations")]
    EmptyDemos,
    #[error("demonstration vocabulary differs from the model's")]
    Vocabulary,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("value iteration did not converge in {0} sweeps")]
    NotConverged(usize),
    #[error("Q-learning diverged at step {step}")]
    Diverged { step: usize },
    #[error(transparent)]
    Motif(#[from] MotifError),
    #[error(transparent)]
    Rm(#[from] RmError),
    #[error(transparent)]
    Expert(#[from] ExpertError),
}

/// One point of a learning curve: the policy after `irl_step - 1` updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub irl_step: usize,
    /// Simulator steps the learner has spent so far (evaluation excluded).
    pub env_interactions: u64,
    pub avg_return: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub theta: ThetaParams,
    /// Motif structure with the learned weights attached.
    pub rm: RewardMachine,
    pub curve: Vec<CurvePoint>,
    pub policy: LearnedPolicy,
    pub interactions: u64,
    pub motif: Option<LearnedMotif>,
}

impl TrainOutcome {
    pub fn final_return(&self) -> f64 {
        self.curve.last().map_or(0.0, |p| p.avg_return)
    }
}
