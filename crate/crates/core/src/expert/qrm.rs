use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::model::TabularModel;
use crate::rm::RewardMachine;
use crate::rng::Rng;

use super::ExpertError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QrmConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub steps: usize,
    /// Episode length during training; game-over also resets.
    pub episode_horizon: usize,
    /// Update every machine state's table from each transition.
    pub counterfactual: bool,
    /// Watchdog bound on |Q|.
    pub q_bound: f64,
}

impl Default for QrmConfig {
    fn default() -> Self {
        QrmConfig {
            alpha: 0.1,
            gamma: 0.9,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            steps: 200_000,
            episode_horizon: 1000,
            counterfactual: true,
            q_bound: 1e6,
        }
    }
}

/// One Q-table per machine state, flattened as `((u * |O|) + o) * |A| + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct QrmPolicy {
    num_rm_states: usize,
    num_obs: usize,
    num_actions: usize,
    q: Vec<f64>,
}

impl QrmPolicy {
    pub fn zeros(num_rm_states: usize, num_obs: usize, num_actions: usize) -> Self {
        QrmPolicy {
            num_rm_states,
            num_obs,
            num_actions,
            q: vec![0.0; num_rm_states * num_obs * num_actions],
        }
    }

    pub fn num_rm_states(&self) -> usize {
        self.num_rm_states
    }

    pub fn num_obs(&self) -> usize {
        self.num_obs
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn base(&self, u: usize, o: usize) -> usize {
        (u * self.num_obs + o) * self.num_actions
    }

    pub fn q(&self, u: usize, o: usize, a: usize) -> f64 {
        self.q[self.base(u, o) + a]
    }

    pub fn q_mut(&mut self, u: usize, o: usize, a: usize) -> &mut f64 {
        let b = self.base(u, o);
        &mut self.q[b + a]
    }

    pub fn row(&self, u: usize, o: usize) -> &[f64] {
        let b = self.base(u, o);
        &self.q[b..b + self.num_actions]
    }

    /// Arg-max action; ties go to the lowest index.
    pub fn greedy(&self, u: usize, o: usize) -> usize {
        argmax(self.row(u, o))
    }

    pub fn max_q(&self, u: usize, o: usize) -> f64 {
        self.row(u, o).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = a;
        }
    }
    best
}

/// Arg-max with uniformly random tie-breaking. Used while learning so that
/// an untrained (all-zero) table does not pin the agent to action 0.
pub(crate) fn greedy_random_ties(row: &[f64], rng: &mut Rng) -> usize {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = row.iter().filter(|&&v| v == best).count();
    let mut k = if ties > 1 { rng.random_range(0..ties) } else { 0 };
    for (a, &v) in row.iter().enumerate() {
        if v == best {
            if k == 0 {
                return a;
            }
            k -= 1;
        }
    }
    argmax(row)
}

/// Samples a successor; deterministic rows consume no randomness.
pub(crate) fn sample_successor(succ: &[(usize, f64)], rng: &mut Rng) -> usize {
    if succ.len() == 1 {
        return succ[0].0;
    }
    let r: f64 = rng.random();
    let mut acc = 0.0;
    for &(o, p) in succ {
        acc += p;
        if r < acc {
            return o;
        }
    }
    succ[succ.len() - 1].0
}

pub(crate) fn sample_initial(model: &TabularModel, rng: &mut Rng) -> usize {
    let init = model.initial();
    let nonzero: Vec<(usize, f64)> = init
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(o, &p)| (o, p))
        .collect();
    sample_successor(&nonzero, rng)
}

/// Q-learning with one table per machine state. Reward is 1 exactly on a
/// goal transition; game-over transitions do not bootstrap.
pub fn qrm_train(
    model: &TabularModel,
    rm: &RewardMachine,
    cfg: &QrmConfig,
    rng: &mut Rng,
) -> Result<QrmPolicy, ExpertError> {
    if rm.terminal_states().is_empty() {
        return Err(ExpertError::Invalid(
            "reward machine has no goal states to learn from".into(),
        ));
    }
    let n_u = rm.num_states();
    let n_o = model.num_obs();
    let n_a = model.num_actions();
    let mut pol = QrmPolicy::zeros(n_u, n_o, n_a);
    // δ(v, L(o')) cached per (v, o')
    let mut next_u = vec![(0usize, false); n_u * n_o];
    for v in 0..n_u {
        for o in 0..n_o {
            let s = rm.transition(v, model.label(o))?;
            next_u[v * n_o + o] = (s.next, s.goal);
        }
    }

    let mut o = sample_initial(model, rng);
    let mut u = rm.initial_state();
    let mut t_ep = 0;
    let span = cfg.steps.max(1) as f64;
    for step in 0..cfg.steps {
        let frac = step as f64 / span;
        let eps = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
        let a = if rng.random::<f64>() < eps {
            rng.random_range(0..n_a)
        } else {
            greedy_random_ties(pol.row(u, o), rng)
        };
        let o2 = sample_successor(model.successors(o, a), rng);
        let over = model.is_terminal(o2);
        let states: Vec<usize> = if cfg.counterfactual {
            (0..n_u).collect()
        } else {
            vec![u]
        };
        for v in states {
            if rm.is_terminal(v) {
                continue;
            }
            let (v2, goal) = next_u[v * n_o + o2];
            let r = if goal { 1.0 } else { 0.0 };
            let target = if over {
                r
            } else {
                r + cfg.gamma * pol.max_q(v2, o2)
            };
            let k = pol.base(v, o) + a;
            pol.q[k] += cfg.alpha * (target - pol.q[k]);
            let q = pol.q[k];
            if !q.is_finite() || q.abs() > cfg.q_bound {
                return Err(ExpertError::Diverged { step, value: q });
            }
        }
        u = next_u[u * n_o + o2].0;
        o = o2;
        t_ep += 1;
        if over || t_ep >= cfg.episode_horizon {
            o = sample_initial(model, rng);
            u = rm.initial_state();
            t_ep = 0;
        }
    }
    Ok(pol)
}
