use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::expert::{greedy_random_ties, sample_initial, sample_successor, Dataset, QrmConfig, QrmPolicy, Trajectory};
use crate::model::TabularModel;
use crate::rng::{stream, Rng};

use super::eval::LearnedPolicy;
use super::{CurvePoint, IrlError, ThetaParams, TrainOutcome};

/// Discounted feature expectations: the mean over trajectories of
/// `sum_t gamma^t L(o_t)`.
pub fn feature_expectations(trajs: &[Trajectory], width: usize, gamma: f64) -> Vec<f64> {
    let mut mu = vec![0.0; width];
    if trajs.is_empty() {
        return mu;
    }
    for t in trajs {
        let mut g = 1.0;
        for l in &t.labels {
            for i in l.iter().filter(|&i| i < width) {
                mu[i] += g;
            }
            g *= gamma;
        }
    }
    let k = 1.0 / trajs.len() as f64;
    mu.iter_mut().for_each(|v| *v *= k);
    mu
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxMargin {
    pub w: Vec<f64>,
    pub margin: f64,
    /// The expert lies within `epsilon` of the learners' convex hull.
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A z = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                let (top, bottom) = a.split_at_mut(r);
                for (x, y) in bottom[0][c..].iter_mut().zip(&top[c][c..]) {
                    *x -= f * y;
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut z = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * z[k]).sum();
        z[r] = (b[r] - s) / a[r][r];
    }
    Some(z)
}

/// Minimum-norm point of the convex hull of `points` (Wolfe's algorithm).
pub fn min_norm_point(points: &[Vec<f64>]) -> Vec<f64> {
    let dim = points[0].len();
    let scale = points.iter().map(|p| dot(p, p)).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-12 * scale;
    let start = (0..points.len())
        .min_by(|&i, &j| dot(&points[i], &points[i]).total_cmp(&dot(&points[j], &points[j])))
        .expect("nonempty");
    let mut set = vec![start];
    let mut lambda = vec![1.0];
    let combine = |set: &[usize], lam: &[f64]| {
        let mut x = vec![0.0; dim];
        for (&i, &l) in set.iter().zip(lam) {
            for (xk, pk) in x.iter_mut().zip(&points[i]) {
                *xk += l * pk;
            }
        }
        x
    };
    let mut x = points[start].clone();
    for _ in 0..1000 {
        let xx = dot(&x, &x);
        let j = (0..points.len())
            .min_by(|&a, &b| dot(&x, &points[a]).total_cmp(&dot(&x, &points[b])))
            .expect("nonempty");
        if xx - dot(&x, &points[j]) <= tol || set.contains(&j) {
            break;
        }
        set.push(j);
        lambda.push(0.0);
        loop {
            // affine minimizer over the current corral
            let k = set.len();
            let mut a = vec![vec![0.0; k + 1]; k + 1];
            for r in 0..k {
                for c in 0..k {
                    a[r][c] = dot(&points[set[r]], &points[set[c]]);
                }
                a[r][k] = 1.0;
                a[k][r] = 1.0;
            }
            let mut b = vec![0.0; k + 1];
            b[k] = 1.0;
            let Some(z) = solve(a, b) else {
                // affinely dependent corral: keep the current point
                set.pop();
                lambda.pop();
                break;
            };
            let alpha = &z[..k];
            if alpha.iter().all(|&v| v > 1e-15) {
                lambda = alpha.to_vec();
                break;
            }
            let mut theta: f64 = 1.0;
            for i in 0..k {
                if alpha[i] <= 1e-15 {
                    let d = lambda[i] - alpha[i];
                    if d > 0.0 {
                        theta = theta.min(lambda[i] / d);
                    }
                }
            }
            for i in 0..k {
                lambda[i] = theta * alpha[i] + (1.0 - theta) * lambda[i];
            }
            let mut keep_set = Vec::with_capacity(k);
            let mut keep_lam = Vec::with_capacity(k);
            for i in 0..k {
                if lambda[i] > 1e-15 {
                    keep_set.push(set[i]);
                    keep_lam.push(lambda[i]);
                }
            }
            let s: f64 = keep_lam.iter().sum();
            keep_lam.iter_mut().for_each(|l| *l /= s);
            set = keep_set;
            lambda = keep_lam;
        }
        x = combine(&set, &lambda);
    }
    x
}

/// Minimum-norm `w` with `(mu_e - mu_l) . w >= epsilon` for every learner.
///
/// With `d` the minimum-norm point of the hull of `mu_e - mu_l`, the exact
/// solution is `w = epsilon d / |d|^2`. When `|d| < epsilon` no unit-norm
/// weight separates the expert by `epsilon`: the result is flagged converged
/// and carries the best unit direction with its margin `|d|`.
pub fn max_margin_weights(mu_e: &[f64], mu_learners: &[Vec<f64>], epsilon: f64) -> Result<MaxMargin, IrlError> {
    if mu_learners.is_empty() {
        return Err(IrlError::Config("max-margin needs at least one learner".into()));
    }
    if mu_learners.iter().any(|m| m.len() != mu_e.len()) {
        return Err(IrlError::Shape("feature expectation lengths differ".into()));
    }
    let diffs: Vec<Vec<f64>> = mu_learners
        .iter()
        .map(|m| mu_e.iter().zip(m).map(|(a, b)| a - b).collect())
        .collect();
    let d = min_norm_point(&diffs);
    let norm = dot(&d, &d).sqrt();
    if norm < epsilon {
        let w = if norm > 0.0 {
            d.iter().map(|v| v / norm).collect()
        } else {
            vec![0.0; d.len()]
        };
        return Ok(MaxMargin {
            w,
            margin: norm,
            converged: true,
        });
    }
    let k = epsilon / (norm * norm);
    Ok(MaxMargin {
        w: d.iter().map(|v| v * k).collect(),
        margin: epsilon,
        converged: false,
    })
}

/// Tabular Q-learning on observations with reward `w . L(o')` on arrival.
/// Returns the table (as a one-state policy) and the number of steps taken.
pub fn td_q_learning(
    model: &TabularModel,
    w: &[f64],
    cfg: &QrmConfig,
    rng: &mut Rng,
) -> Result<(QrmPolicy, u64), IrlError> {
    let n_a = model.num_actions();
    let mut pol = QrmPolicy::zeros(1, model.num_obs(), n_a);
    let rewards: Vec<f64> = model.labels().iter().map(|l| l.dot(w)).collect();
    if rewards.iter().all(|&r| r == 0.0) {
        return Ok((pol, 0));
    }
    let mut o = sample_initial(model, rng);
    let mut t_ep = 0;
    let span = cfg.steps.max(1) as f64;
    for step in 0..cfg.steps {
        let eps = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * (step as f64 / span);
        let a = if rng.random::<f64>() < eps {
            rng.random_range(0..n_a)
        } else {
            greedy_random_ties(pol.row(0, o), rng)
        };
        let o2 = sample_successor(model.successors(o, a), rng);
        let over = model.is_terminal(o2);
        let target = if over {
            rewards[o2]
        } else {
            rewards[o2] + cfg.gamma * pol.max_q(0, o2)
        };
        let q = pol.q_mut(0, o, a);
        *q += cfg.alpha * (target - *q);
        if !q.is_finite() || q.abs() > cfg.q_bound {
            return Err(IrlError::Diverged { step });
        }
        o = o2;
        t_ep += 1;
        if over || t_ep >= cfg.episode_horizon {
            o = sample_initial(model, rng);
            t_ep = 0;
        }
    }
    Ok((pol, cfg.steps as u64))
}

/// Greedy rollouts of an observation-only policy; returns the trajectories
/// and the number of environment steps.
fn rollouts(model: &TabularModel, q: &QrmPolicy, n: usize, len: usize, rng: &mut Rng) -> (Vec<Trajectory>, u64) {
    let mut out = Vec::with_capacity(n);
    let mut steps = 0u64;
    for _ in 0..n {
        let mut o = sample_initial(model, rng);
        let mut t = Trajectory {
            obs: vec![o],
            acts: Vec::new(),
            labels: vec![model.label(o)],
        };
        for _ in 0..len {
            let a = q.greedy(0, o);
            o = sample_successor(model.successors(o, a), rng);
            t.acts.push(a);
            t.obs.push(o);
            t.labels.push(model.label(o));
            steps += 1;
            if model.is_terminal(o) {
                break;
            }
        }
        out.push(t);
    }
    (out, steps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApprenticeshipConfig {
    /// Cap on learner iterations (curve points).
    pub iterations: usize,
    pub epsilon: f64,
    /// Discount of the feature expectations.
    pub gamma: f64,
    pub td: QrmConfig,
    pub rollouts: usize,
    pub rollout_len: usize,
    /// Stop before an iteration would exceed this many environment steps.
    pub interaction_budget: u64,
}

impl Default for ApprenticeshipConfig {
    fn default() -> Self {
        ApprenticeshipConfig {
            iterations: 30,
            epsilon: 0.1,
            gamma: 0.9,
            td: QrmConfig {
                steps: 20_000,
                ..QrmConfig::default()
            },
            rollouts: 10,
            rollout_len: 100,
            interaction_budget: 100_000,
        }
    }
}

/// Apprenticeship IRL: alternate max-margin weight fitting with Q-learning
/// until the expert's feature expectations are matched within `epsilon`,
/// the iteration cap, or the interaction budget. Curve point `m` scores the
/// `m`-th learner; the last learner is returned.
pub fn apprenticeship_train(
    demos: &Dataset,
    model: &TabularModel,
    cfg: &ApprenticeshipConfig,
    seed: u64,
    eval: &mut dyn FnMut(&LearnedPolicy) -> f64,
) -> Result<TrainOutcome, IrlError> {
    if demos.is_empty() {
        return Err(IrlError::EmptyDemos);
    }
    if demos.vocab != *model.vocab() {
        return Err(IrlError::Vocabulary);
    }
    if cfg.iterations == 0 {
        return Err(IrlError::Config("iterations must be at least 1".into()));
    }
    let width = model.vocab().len();
    let mu_e = feature_expectations(&demos.trajectories, width, cfg.gamma);
    let mut rng = stream(seed, "apprenticeship", 0);

    let q = QrmPolicy::zeros(1, model.num_obs(), model.num_actions());
    let (trajs, steps) = rollouts(model, &q, cfg.rollouts, cfg.rollout_len, &mut rng);
    let mut interactions = steps;
    let gap = |mu: &[f64]| mu.iter().zip(&mu_e).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let mut mus = vec![feature_expectations(&trajs, width, cfg.gamma)];
    let mut curve = vec![CurvePoint {
        irl_step: 1,
        env_interactions: interactions,
        avg_return: eval(&LearnedPolicy::Tabular { q: q.clone() }),
    }];
    let mut last = (q, vec![0.0; width]);
    let per_iter = cfg.td.steps as u64 + (cfg.rollouts * cfg.rollout_len) as u64;
    for step in 2..=cfg.iterations {
        let mm = max_margin_weights(&mu_e, &mus, cfg.epsilon)?;
        if mm.converged || interactions + per_iter > cfg.interaction_budget {
            break;
        }
        let norm = dot(&mm.w, &mm.w).sqrt();
        let w: Vec<f64> = mm.w.iter().map(|v| v / norm).collect();
        let (q_new, td_steps) = td_q_learning(model, &w, &cfg.td, &mut rng)?;
        let (trajs, steps) = rollouts(model, &q_new, cfg.rollouts, cfg.rollout_len, &mut rng);
        interactions += td_steps + steps;
        let mu = feature_expectations(&trajs, width, cfg.gamma);
        log::debug!("learner {}: w {:.3?}, squared gap {:.4}", mus.len(), w, gap(&mu));
        mus.push(mu);
        curve.push(CurvePoint {
            irl_step: step,
            env_interactions: interactions,
            avg_return: eval(&LearnedPolicy::Tabular { q: q_new.clone() }),
        });
        last = (q_new, w);
    }
    let (q, w) = last;
    let theta = ThetaParams::from_rows(&[w])?;
    let rm = crate::rm::RewardMachine::trivial(model.vocab().clone()).with_weights(theta.rows())?;
    Ok(TrainOutcome {
        theta,
        rm,
        curve,
        policy: LearnedPolicy::Tabular { q },
        interactions,
        motif: None,
    })
}
