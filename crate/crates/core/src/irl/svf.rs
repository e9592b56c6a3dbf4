use rand::Rng as _;

use crate::expert::sample_successor;
use crate::model::TabularModel;
use crate::motif::AugmentedTrajectory;
use crate::rm::{LabelSet, ProductModel};
use crate::rng::Rng;

use super::{IrlError, SoftPolicy};

/// Visitation table over `(machine state, observation)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvfTable {
    num_rm_states: usize,
    num_obs: usize,
    data: Vec<f64>,
}

impl SvfTable {
    pub fn zeros(num_rm_states: usize, num_obs: usize) -> Self {
        SvfTable {
            num_rm_states,
            num_obs,
            data: vec![0.0; num_rm_states * num_obs],
        }
    }

    pub fn num_rm_states(&self) -> usize {
        self.num_rm_states
    }

    pub fn num_obs(&self) -> usize {
        self.num_obs
    }

    pub fn get(&self, u: usize, o: usize) -> f64 {
        self.data[u * self.num_obs + o]
    }

    pub fn add(&mut self, u: usize, o: usize, v: f64) {
        self.data[u * self.num_obs + o] += v;
    }

    /// Entries in product-index order `u * |O| + o`.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn scaled(&self, k: f64) -> SvfTable {
        SvfTable {
            data: self.data.iter().map(|v| v * k).collect(),
            ..self.clone()
        }
    }
}

/// Per-state reward weights `w_u`, row-major `|U| x |P|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaParams {
    num_rm_states: usize,
    width: usize,
    w: Vec<f64>,
}

impl ThetaParams {
    pub fn zeros(num_rm_states: usize, width: usize) -> Self {
        ThetaParams {
            num_rm_states,
            width,
            w: vec![0.0; num_rm_states * width],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, IrlError> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || rows.iter().any(|r| r.len() != width) {
            return Err(IrlError::Shape("ragged or empty weight table".into()));
        }
        Ok(ThetaParams {
            num_rm_states: rows.len(),
            width,
            w: rows.concat(),
        })
    }

    pub fn num_rm_states(&self) -> usize {
        self.num_rm_states
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.w[u * self.width..(u + 1) * self.width]
    }

    pub fn get(&self, u: usize, i: usize) -> f64 {
        self.w[u * self.width + i]
    }

    pub fn set(&mut self, u: usize, i: usize, v: f64) {
        self.w[u * self.width + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.w.chunks(self.width).map(<[f64]>::to_vec).collect()
    }

    pub fn reward(&self, u: usize, l: LabelSet) -> f64 {
        l.dot(self.row(u))
    }

    /// Reward of every product state, `r(u, o) = w_u . L(o)`.
    pub fn product_rewards(&self, model: &TabularModel) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.num_rm_states * model.num_obs());
        for u in 0..self.num_rm_states {
            for o in 0..model.num_obs() {
                r.push(self.reward(u, model.label(o)));
            }
        }
        r
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|v| v.is_finite())
    }
}

/// Raw co-occurrence counts of `(u_t, o_t)` over all steps of all
/// trajectories.
pub fn expert_svf(aug: &[AugmentedTrajectory], num_rm_states: usize, num_obs: usize) -> SvfTable {
    let mut t = SvfTable::zeros(num_rm_states, num_obs);
    for a in aug {
        for (&u, &o) in a.states.iter().zip(&a.traj.obs) {
            t.add(u, o, 1.0);
        }
    }
    t
}

/// Exact expected visit counts over `t = 0..=T` under `pi`, starting from
/// the product's initial distribution. `T` is the policy horizon.
pub fn policy_svf(product: &ProductModel, pi: &SoftPolicy) -> SvfTable {
    let n = product.num_states();
    let n_a = product.num_actions();
    let mut d = product.initial().to_vec();
    let mut acc = d.clone();
    let mut next = vec![0.0; n];
    for t in 0..pi.horizon() {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (x, &mass) in d.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let probs = pi.probs(t, x);
            for (a, &pa) in probs.iter().enumerate().take(n_a) {
                let m = mass * pa;
                if m == 0.0 {
                    continue;
                }
                for &(y, p) in product.successors(x, a) {
                    next[y] += m * p;
                }
            }
        }
        std::mem::swap(&mut d, &mut next);
        for (a, v) in acc.iter_mut().zip(&d) {
            *a += v;
        }
    }
    SvfTable {
        num_rm_states: product.num_rm_states(),
        num_obs: product.num_obs(),
        data: acc,
    }
}

/// Monte-Carlo estimate of [`policy_svf`] from `rollouts` sampled
/// trajectories; returns the per-trajectory average.
pub fn policy_svf_monte_carlo(
    product: &ProductModel,
    pi: &SoftPolicy,
    rollouts: usize,
    rng: &mut Rng,
) -> SvfTable {
    let n = product.num_states();
    let mut acc = vec![0.0; n];
    let init: Vec<(usize, f64)> = product
        .initial()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(x, &p)| (x, p))
        .collect();
    for _ in 0..rollouts {
        let mut x = sample_successor(&init, rng);
        acc[x] += 1.0;
        for t in 0..pi.horizon() {
            let probs = pi.probs(t, x);
            let r: f64 = rng.random();
            let mut a = probs.len() - 1;
            let mut c = 0.0;
            for (i, &p) in probs.iter().enumerate() {
                c += p;
                if r < c {
                    a = i;
                    break;
                }
            }
            x = sample_successor(product.successors(x, a), rng);
            acc[x] += 1.0;
        }
    }
    let k = 1.0 / rollouts.max(1) as f64;
    SvfTable {
        num_rm_states: product.num_rm_states(),
        num_obs: product.num_obs(),
        data: acc.into_iter().map(|v| v * k).collect(),
    }
}

/// `dL/dw_u = sum_o (mu_D(u,o) - mu_pi(u,o)) L(o)`; both tables must be on
/// the per-trajectory scale.
pub fn maxent_gradient(
    mu_d: &SvfTable,
    mu_pi: &SvfTable,
    labels: &[LabelSet],
    width: usize,
) -> Result<ThetaParams, IrlError> {
    if mu_d.num_rm_states != mu_pi.num_rm_states || mu_d.num_obs != mu_pi.num_obs {
        return Err(IrlError::Shape(format!(
            "visitation tables {}x{} and {}x{}",
            mu_d.num_rm_states, mu_d.num_obs, mu_pi.num_rm_states, mu_pi.num_obs
        )));
    }
    if labels.len() != mu_d.num_obs {
        return Err(IrlError::Shape(format!(
            "{} labels for {} observations",
            labels.len(),
            mu_d.num_obs
        )));
    }
    let mut g = ThetaParams::zeros(mu_d.num_rm_states, width);
    for u in 0..mu_d.num_rm_states {
        for (o, &l) in labels.iter().enumerate() {
            let diff = mu_d.get(u, o) - mu_pi.get(u, o);
            if diff == 0.0 {
                continue;
            }
            for i in l.iter() {
                g.w[u * width + i] += diff;
            }
        }
    }
    Ok(g)
}
