//! Expert policies (Q-learning over reward-machine states) and the
//! demonstration protocol.

mod dataset;
mod demos;
mod qrm;

use std::path::PathBuf;

use thiserror::Error;

use crate::rm::RmError;

pub use dataset::{Dataset, Trajectory};
pub use demos::{
    first_reward_step, generate_demos, optimality_filter, shortest_completion_steps, DemoManifest,
    DemoProtocol, DemoSet,
};
pub use qrm::{qrm_train, QrmConfig, QrmPolicy};
pub(crate) use qrm::{argmax, greedy_random_ties, sample_initial, sample_successor};

#[derive(Debug, Error)]
pub enum ExpertError {
    #[error("{0}")]
    Invalid(String),
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("dataset line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Rm(#[from] RmError),
    #[error("Q-learning diverged at step {step} (|Q| = {value})")]
    Diverged { step: usize, value: f64 },
    #[error("rejected too many demonstrations: {accepted} accepted after {attempts} attempts; the policy is not expert-grade")]
    TooManyRejections { attempts: usize, accepted: usize },
}
