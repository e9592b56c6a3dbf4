//! Reward-machine structure learning from demonstrations.
//!
//! A candidate machine is scored by how predictable the next label becomes
//! once the current label is conditioned on the machine state: the cost sums
//! `ln |N_{u,l}|` over every demonstration step, where `N_{u,l}` is the set of
//! labels observed right after label `l` in machine state `u`. Tabu search
//! minimizes the cost under a state budget; an exhaustive search serves as an
//! oracle on small instances.

mod augment;
mod brute;
mod cost;
mod tabu;

use thiserror::Error;

pub use augment::{augment_traces, augment_trajectory, infer_reward_states, AugmentedTrajectory, RewardStates};
pub use brute::{brute_force_rm, BRUTE_FORCE_LIMIT, BRUTE_FORCE_MAX_STATES};
pub use cost::{rm_cost, NextObsSets, Structure, Traces, MAX_ALPHABET};
pub use tabu::{tabu_search, LogEntry, SearchConfig, SearchOutcome};

use crate::expert::Dataset;
use crate::rm::RewardMachine;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotifError {
    #[error("no demonstration steps to learn from")]
    EmptyDemos,
    #[error("demonstrations use {0} distinct label sets; at most {MAX_ALPHABET} are supported")]
    AlphabetTooLarge(usize),
    #[error("exhaustive search would visit {candidates} tables (limit {limit})")]
    SearchSpace { candidates: u128, limit: u128 },
    #[error("invalid search configuration: {0}")]
    Config(String),
}

/// Learned machine with its cost and the search trace.
#[derive(Debug, Clone)]
pub struct LearnedMotif {
    pub rm: RewardMachine,
    pub cost: f64,
    pub log: Vec<LogEntry>,
}

/// Tabu search on a dataset; returns the machine over the dataset vocabulary.
pub fn learn_motif(data: &Dataset, cfg: &SearchConfig) -> Result<LearnedMotif, MotifError> {
    let traces = Traces::with_options(data, cfg.empty_self_loop)?;
    let out = tabu_search(&traces, cfg)?;
    Ok(LearnedMotif {
        rm: out.structure.pruned(&traces).to_rm(&traces),
        cost: out.cost,
        log: out.log,
    })
}

/// Exhaustive search on a dataset.
pub fn learn_motif_exhaustive(
    data: &Dataset,
    u_max: usize,
    empty_self_loop: bool,
) -> Result<LearnedMotif, MotifError> {
    let traces = Traces::with_options(data, empty_self_loop)?;
    let (s, cost) = brute_force_rm(&traces, u_max)?;
    Ok(LearnedMotif {
        rm: s.pruned(&traces).to_rm(&traces),
        cost,
        log: Vec::new(),
    })
}
