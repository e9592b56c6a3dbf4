use serde::{Deserialize, Serialize};

use crate::expert::argmax;
use crate::motif::AugmentedTrajectory;
use crate::rm::ProductModel;

use super::IrlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanningMode {
    /// Undiscounted soft backups over the horizon; one policy per timestep.
    FiniteHorizon,
    /// Discounted soft value iteration to a fixed point; stationary policy.
    Discounted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftConfig {
    pub horizon: usize,
    pub mode: PlanningMode,
    pub gamma: f64,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

/// Action distributions `pi_t(a | x)`; a stationary policy stores a single
/// slice used at every timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftPolicy {
    horizon: usize,
    slices: usize,
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
    value0: Vec<f64>,
}

impl SoftPolicy {
    /// Uniform stationary policy.
    pub fn uniform(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        SoftPolicy {
            horizon,
            slices: 1,
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
            value0: vec![0.0; num_states],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn is_stationary(&self) -> bool {
        self.slices == 1
    }

    /// Distribution at timestep `t`; times past the horizon reuse the last
    /// slice.
    pub fn probs(&self, t: usize, x: usize) -> &[f64] {
        let s = t.min(self.slices - 1);
        let b = (s * self.num_states + x) * self.num_actions;
        &self.probs[b..b + self.num_actions]
    }

    /// Most likely action; ties go to the lowest index.
    pub fn greedy(&self, t: usize, x: usize) -> usize {
        argmax(self.probs(t, x))
    }

    /// Soft value at time 0 (finite horizon) or the fixed point (discounted).
    pub fn value0(&self) -> &[f64] {
        &self.value0
    }
}

fn backup(product: &ProductModel, v: &[f64], x: usize, q: &mut [f64], scale: f64) -> f64 {
    for (a, qa) in q.iter_mut().enumerate() {
        *qa = scale
            * product
                .successors(x, a)
                .iter()
                .map(|&(y, p)| p * v[y])
                .sum::<f64>();
    }
    let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + q.iter().map(|&qa| (qa - m).exp()).sum::<f64>().ln()
}

/// Soft value iteration on the product model for per-state rewards
/// `rewards[x]`. Log-sum-exp is shifted by the row maximum.
pub fn soft_value_iteration(
    product: &ProductModel,
    rewards: &[f64],
    cfg: &SoftConfig,
) -> Result<SoftPolicy, IrlError> {
    let n = product.num_states();
    let n_a = product.num_actions();
    if rewards.len() != n {
        return Err(IrlError::Shape(format!(
            "{} rewards for {n} product states",
            rewards.len()
        )));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(IrlError::NonFinite("reward"));
    }
    if cfg.horizon == 0 {
        return Err(IrlError::Config("horizon must be at least 1".into()));
    }
    let mut q = vec![0.0; n_a];
    match cfg.mode {
        PlanningMode::FiniteHorizon => {
            let t_max = cfg.horizon;
            let mut probs = vec![0.0; t_max * n * n_a];
            let mut v = rewards.to_vec();
            let mut v_new = vec![0.0; n];
            for t in (0..t_max).rev() {
                for x in 0..n {
                    let lse = backup(product, &v, x, &mut q, 1.0);
                    v_new[x] = rewards[x] + lse;
                    let b = (t * n + x) * n_a;
                    for a in 0..n_a {
                        probs[b + a] = (q[a] - lse).exp();
                    }
                }
                std::mem::swap(&mut v, &mut v_new);
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(IrlError::NonFinite("soft value"));
            }
            Ok(SoftPolicy {
                horizon: t_max,
                slices: t_max,
                num_states: n,
                num_actions: n_a,
                probs,
                value0: v,
            })
        }
        PlanningMode::Discounted => {
            if !(0.0..1.0).contains(&cfg.gamma) {
                return Err(IrlError::Config("discount must be in [0, 1)".into()));
            }
            let mut v = vec![0.0; n];
            let mut v_new = vec![0.0; n];
            let mut converged = false;
            for _ in 0..cfg.max_sweeps {
                let mut delta: f64 = 0.0;
                for x in 0..n {
                    v_new[x] = rewards[x] + backup(product, &v, x, &mut q, cfg.gamma);
                    delta = delta.max((v_new[x] - v[x]).abs());
                }
                std::mem::swap(&mut v, &mut v_new);
                if delta < cfg.tolerance {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(IrlError::NotConverged(cfg.max_sweeps));
            }
            let mut probs = vec![0.0; n * n_a];
            for x in 0..n {
                let lse = backup(product, &v, x, &mut q, cfg.gamma);
                for a in 0..n_a {
                    probs[x * n_a + a] = (q[a] - lse).exp();
                }
            }
            Ok(SoftPolicy {
                horizon: cfg.horizon,
                slices: 1,
                num_states: n,
                num_actions: n_a,
                probs,
                value0: v,
            })
        }
    }
}

/// Average trajectory log-likelihood `sum_t r(x_t) - V_0(x_0)` under the
/// finite-horizon soft policy. Exact on deterministic models. Trajectories
/// shorter than `pi.horizon()` are scored as if padded with zero-reward
/// states, which is exact when they end on a game-over cell of a
/// [`crate::TabularModel::with_dead_end`] planning model.
pub fn log_likelihood(
    product: &ProductModel,
    rewards: &[f64],
    pi: &SoftPolicy,
    aug: &[AugmentedTrajectory],
) -> Result<f64, IrlError> {
    if pi.is_stationary() && pi.horizon() > 1 {
        return Err(IrlError::Config(
            "log-likelihood needs a finite-horizon policy".into(),
        ));
    }
    if aug.is_empty() {
        return Err(IrlError::EmptyDemos);
    }
    let mut total = 0.0;
    for a in aug {
        if a.traj.len() > pi.horizon() {
            return Err(IrlError::Shape(format!(
                "trajectory has {} steps, horizon is {}",
                a.traj.len(),
                pi.horizon()
            )));
        }
        let xs: Vec<usize> = a
            .states
            .iter()
            .zip(&a.traj.obs)
            .map(|(&u, &o)| product.index(u, o))
            .collect();
        total += xs.iter().map(|&x| rewards[x]).sum::<f64>() - pi.value0()[xs[0]];
    }
    Ok(total / aug.len() as f64)
}
