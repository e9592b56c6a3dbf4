use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::expert::{sample_initial, sample_successor, QrmPolicy};
use crate::model::TabularModel;
use crate::rm::RewardMachine;
use crate::rng::{stream, Rng};

use super::SoftPolicy;

/// How a soft policy picks actions during evaluation. Q-table policies are
/// always greedy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSelection {
    /// Most likely action, ties to the lowest index.
    #[default]
    Greedy,
    /// Draw from the policy's action distribution.
    Sample,
}

/// A learned controller that can be rolled out in the environment.
#[derive(Debug, Clone)]
pub enum LearnedPolicy {
    /// Time-indexed soft policy on the product of `rm` and a planning model
    /// with `num_obs` observations; acted on greedily.
    Soft {
        rm: RewardMachine,
        pi: SoftPolicy,
        num_obs: usize,
    },
    /// Observation-only Q-table (single machine state), acted on greedily.
    Tabular { q: QrmPolicy },
    /// Q-tables per state of `rm`, e.g. a QRM expert; acted on greedily.
    Machine { rm: RewardMachine, q: QrmPolicy },
}

impl LearnedPolicy {
    pub fn initial_state(&self) -> usize {
        match self {
            LearnedPolicy::Soft { rm, .. } | LearnedPolicy::Machine { rm, .. } => rm.initial_state(),
            LearnedPolicy::Tabular { .. } => 0,
        }
    }

    /// Greedy action at time `t` in `(u, o)`.
    pub fn act(&self, t: usize, u: usize, o: usize) -> usize {
        match self {
            LearnedPolicy::Soft { pi, num_obs, .. } => pi.greedy(t, u * num_obs + o),
            LearnedPolicy::Tabular { q } => q.greedy(0, o),
            LearnedPolicy::Machine { q, .. } => q.greedy(u, o),
        }
    }

    pub fn select(&self, t: usize, u: usize, o: usize, mode: ActionSelection, rng: &mut Rng) -> usize {
        match (self, mode) {
            (LearnedPolicy::Soft { pi, num_obs, .. }, ActionSelection::Sample) => {
                let probs = pi.probs(t, u * num_obs + o);
                let mut r = rng.random::<f64>();
                for (a, &p) in probs.iter().enumerate() {
                    if r < p {
                        return a;
                    }
                    r -= p;
                }
                probs.len() - 1
            }
            _ => self.act(t, u, o),
        }
    }

    pub fn advance(&self, u: usize, model: &TabularModel, o: usize) -> usize {
        match self {
            LearnedPolicy::Soft { rm, .. } | LearnedPolicy::Machine { rm, .. } => {
                rm.step(u, model.label(o)).expect("state in range")
            }
            LearnedPolicy::Tabular { .. } => 0,
        }
    }
}

/// Mean ground-truth return over `episodes` rollouts of at most `horizon`
/// steps. An episode ends at the first reward event of `task_rm` (return 1),
/// on game-over, or at the horizon (return 0). Episode `j` uses the stream
/// `("eval-episode", j)` of `seed`.
pub fn evaluate_policy(
    policy: &LearnedPolicy,
    model: &TabularModel,
    task_rm: &RewardMachine,
    episodes: usize,
    horizon: usize,
    mode: ActionSelection,
    seed: u64,
) -> f64 {
    if episodes == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for j in 0..episodes {
        let mut rng = stream(seed, "eval-episode", j as u64);
        let mut o = sample_initial(model, &mut rng);
        let mut u = policy.initial_state();
        let mut g = task_rm.initial_state();
        for t in 0..horizon {
            let a = policy.select(t, u, o, mode, &mut rng);
            let o2 = sample_successor(model.successors(o, a), &mut rng);
            let s = task_rm.transition(g, model.label(o2)).expect("state in range");
            if s.goal {
                total += 1.0;
                break;
            }
            if model.is_terminal(o2) {
                break;
            }
            g = s.next;
            u = policy.advance(u, model, o2);
            o = o2;
        }
    }
    total / episodes as f64
}
