use std::collections::VecDeque;

use log::warn;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::model::TabularModel;
use crate::rm::RewardMachine;
use crate::rng::stream;

use super::qrm::{sample_initial, sample_successor, QrmPolicy};
use super::{Dataset, ExpertError, Trajectory};

/// Demonstration protocol: greedy expert actions, except for `random_steps`
/// uniformly random actions after every reward event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoProtocol {
    pub max_steps: usize,
    pub random_steps: usize,
    pub num_demos: usize,
    /// Keep only demos whose first reward arrives within this many steps.
    pub optimality_threshold: Option<usize>,
}

impl Default for DemoProtocol {
    fn default() -> Self {
        DemoProtocol {
            max_steps: 1000,
            random_steps: 5,
            num_demos: 50,
            optimality_threshold: None,
        }
    }
}

impl DemoProtocol {
    pub fn validate(&self) -> Result<(), ExpertError> {
        if self.num_demos == 0 {
            return Err(ExpertError::Invalid("num_demos must be at least 1".into()));
        }
        if self.max_steps <= self.random_steps {
            return Err(ExpertError::Invalid(
                "max_steps must exceed random_steps".into(),
            ));
        }
        Ok(())
    }
}

/// Generated demos plus the bookkeeping needed to audit the protocol.
#[derive(Debug, Clone)]
pub struct DemoSet {
    pub dataset: Dataset,
    /// RNG stream index each accepted demo was drawn from.
    pub attempt_ids: Vec<u64>,
    /// Per demo, per action: whether the action was a random draw.
    pub random_mask: Vec<Vec<bool>>,
    pub attempts: usize,
}

/// Rolls out the expert under `protocol`. Attempt `i` draws from the stream
/// `("demo", i)` of `seed`, so demos are reproducible one by one. Attempts
/// with no reward event, or whose first reward comes later than the
/// optimality threshold, are rejected; the run aborts after `100 * N`
/// attempts.
pub fn generate_demos(
    policy: &QrmPolicy,
    model: &TabularModel,
    rm: &RewardMachine,
    protocol: &DemoProtocol,
    seed: u64,
) -> Result<DemoSet, ExpertError> {
    protocol.validate()?;
    let n_a = model.num_actions();
    let max_attempts = 100 * protocol.num_demos;
    let mut out = DemoSet {
        dataset: Dataset::new(model.vocab().clone(), Vec::new()),
        attempt_ids: Vec::new(),
        random_mask: Vec::new(),
        attempts: 0,
    };
    let mut attempt = 0u64;
    while out.dataset.len() < protocol.num_demos {
        if out.attempts >= max_attempts {
            return Err(ExpertError::TooManyRejections {
                attempts: out.attempts,
                accepted: out.dataset.len(),
            });
        }
        let mut rng = stream(seed, "demo", attempt);
        let mut o = sample_initial(model, &mut rng);
        let mut u = rm.initial_state();
        let mut traj = Trajectory {
            obs: vec![o],
            acts: Vec::new(),
            labels: vec![model.label(o)],
        };
        let mut mask = Vec::new();
        let mut random_left = 0;
        let mut rewards = 0;
        for _ in 0..protocol.max_steps {
            let random = random_left > 0;
            let a = if random {
                random_left -= 1;
                rng.random_range(0..n_a)
            } else {
                policy.greedy(u, o)
            };
            let o2 = sample_successor(model.successors(o, a), &mut rng);
            let s = rm.transition(u, model.label(o2))?;
            traj.acts.push(a);
            traj.obs.push(o2);
            traj.labels.push(model.label(o2));
            mask.push(random);
            if s.goal {
                rewards += 1;
                random_left = protocol.random_steps;
            }
            u = s.next;
            o = o2;
            if model.is_terminal(o2) {
                break;
            }
        }
        out.attempts += 1;
        let optimal = protocol
            .optimality_threshold
            .is_none_or(|th| first_reward_step(&traj, rm).is_some_and(|s| s <= th));
        if rewards > 0 && optimal {
            out.dataset.trajectories.push(traj);
            out.attempt_ids.push(attempt);
            out.random_mask.push(mask);
        }
        attempt += 1;
    }
    Ok(out)
}

/// Step (1-based action count) at which the first reward event occurs.
pub fn first_reward_step(traj: &Trajectory, rm: &RewardMachine) -> Option<usize> {
    let mut u = rm.initial_state();
    for (t, &l) in traj.labels.iter().enumerate().skip(1) {
        let s = rm.transition(u, l).ok()?;
        if s.goal {
            return Some(t);
        }
        u = s.next;
    }
    None
}

/// Keeps trajectories whose first reward arrives within `threshold` steps;
/// `None` keeps everything.
pub fn optimality_filter(data: &Dataset, rm: &RewardMachine, threshold: Option<usize>) -> Dataset {
    let Some(th) = threshold else {
        return data.clone();
    };
    let trajectories: Vec<Trajectory> = data
        .trajectories
        .iter()
        .filter(|t| first_reward_step(t, rm).is_some_and(|s| s <= th))
        .cloned()
        .collect();
    if trajectories.is_empty() {
        warn!("optimality filter with threshold {th} kept no trajectories");
    }
    Dataset::new(data.vocab.clone(), trajectories)
}

/// Fewest steps from the initial distribution's support to the first reward
/// event, by breadth-first search over `(u, o)`. Game-over cells are not
/// expanded.
pub fn shortest_completion_steps(model: &TabularModel, rm: &RewardMachine) -> Option<usize> {
    let n_o = model.num_obs();
    let mut dist = vec![usize::MAX; rm.num_states() * n_o];
    let mut queue = VecDeque::new();
    for (o, &p) in model.initial().iter().enumerate() {
        if p > 0.0 {
            let x = rm.initial_state() * n_o + o;
            dist[x] = 0;
            queue.push_back(x);
        }
    }
    while let Some(x) = queue.pop_front() {
        let (u, o) = (x / n_o, x % n_o);
        if model.is_terminal(o) {
            continue;
        }
        for a in 0..model.num_actions() {
            for &(o2, p) in model.successors(o, a) {
                if p <= 0.0 {
                    continue;
                }
                let s = rm.transition(u, model.label(o2)).expect("state in range");
                if s.goal {
                    return Some(dist[x] + 1);
                }
                let y = s.next * n_o + o2;
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
    }
    None
}

/// Provenance written next to a demo file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemoManifest {
    pub task_id: u32,
    pub seed: u64,
    pub protocol: DemoProtocol,
    pub qrm: super::QrmConfig,
    pub accepted: usize,
    pub attempts: usize,
    pub attempt_ids: Vec<u64>,
}
