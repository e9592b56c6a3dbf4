use serde::{Deserialize, Serialize};

use crate::expert::Dataset;
use crate::model::TabularModel;
use crate::motif::{augment_traces, infer_reward_states, learn_motif, LearnedMotif, RewardStates, SearchConfig};
use crate::rm::{ProductModel, RewardMachine};
use crate::rng::stream;

use super::eval::LearnedPolicy;
use super::soft::{log_likelihood, soft_value_iteration, PlanningMode, SoftConfig, SoftPolicy};
use super::svf::{expert_svf, maxent_gradient, policy_svf, policy_svf_monte_carlo, ThetaParams};
use super::{CurvePoint, IrlError, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    GradientAscent,
    Adam,
    /// Limited-memory BFGS with Armijo backtracking on the demo
    /// log-likelihood. Monotone; needs a deterministic model.
    Lbfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvfMethod {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrlConfig {
    /// IRL steps M; the curve has one point per step.
    pub iterations: usize,
    /// Step size; for [`Optimizer::Lbfgs`] the largest weight change of a
    /// step taken without curvature history.
    pub learning_rate: f64,
    /// Scale the step size by `1/sqrt(m)` at update `m`.
    pub lr_decay: bool,
    pub optimizer: Optimizer,
    /// Planning horizon T; demonstrations are truncated to it. `None` uses
    /// the longest demonstration.
    pub horizon: Option<usize>,
    pub mode: PlanningMode,
    /// Discount for [`PlanningMode::Discounted`].
    pub gamma: f64,
    /// Fixed-point tolerance for [`PlanningMode::Discounted`].
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub svf: SvfMethod,
    pub mc_rollouts: usize,
    /// Initial weight on the entry labels of inferred reward states.
    pub init_bonus: f64,
    /// Curvature pairs kept by [`Optimizer::Lbfgs`]; 0 gives steepest ascent.
    pub lbfgs_memory: usize,
}

impl Default for IrlConfig {
    fn default() -> Self {
        IrlConfig {
            iterations: 30,
            learning_rate: 0.5,
            lr_decay: true,
            optimizer: Optimizer::Lbfgs,
            horizon: Some(60),
            mode: PlanningMode::FiniteHorizon,
            gamma: 0.9,
            tolerance: 1e-8,
            max_sweeps: 100_000,
            svf: SvfMethod::Exact,
            mc_rollouts: 1000,
            init_bonus: 1.0,
            lbfgs_memory: 10,
        }
    }
}

impl IrlConfig {
    pub fn validate(&self) -> Result<(), IrlError> {
        if self.iterations == 0 {
            return Err(IrlError::Config("iterations must be at least 1".into()));
        }
        if self.horizon == Some(0) {
            return Err(IrlError::Config("horizon must be at least 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(IrlError::Config("tolerance must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(IrlError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Ascent step on `theta` along gradient `g`.
    fn step(&mut self, theta: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            theta[i] += lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

pub(crate) fn soft_config(cfg: &IrlConfig, horizon: usize) -> SoftConfig {
    SoftConfig {
        horizon,
        mode: cfg.mode,
        gamma: cfg.gamma,
        tolerance: cfg.tolerance,
        max_sweeps: cfg.max_sweeps,
    }
}

/// MaxEnt IRL on the product of `model` and a fixed machine structure.
///
/// `eval` scores the policy of the current weights; curve point `m` reports
/// the policy computed from the weights after `m - 1` updates. Weights start
/// at zero except for `init_bonus` on the entry labels of `hints`.
pub fn maxent_on_motif(
    demos: &Dataset,
    model: &TabularModel,
    rm: &RewardMachine,
    hints: &RewardStates,
    cfg: &IrlConfig,
    seed: u64,
    eval: &mut dyn FnMut(&LearnedPolicy) -> f64,
) -> Result<TrainOutcome, IrlError> {
    cfg.validate()?;
    if demos.is_empty() {
        return Err(IrlError::EmptyDemos);
    }
    if demos.vocab != *model.vocab() || rm.vocab() != model.vocab() {
        return Err(IrlError::Vocabulary);
    }
    if let Some(&o) = demos
        .trajectories
        .iter()
        .flat_map(|t| t.obs.iter())
        .find(|&&o| o >= model.num_obs())
    {
        return Err(IrlError::Shape(format!("observation {o} outside the model")));
    }
    let planning = model.with_dead_end();
    let product = ProductModel::build(&planning, rm);
    let n_u = rm.num_states();
    let width = model.vocab().len();
    let horizon = cfg.horizon.unwrap_or_else(|| demos.max_len()).max(1);
    // demonstrations longer than the planning horizon contribute their prefix
    let aug: Vec<_> = augment_traces(demos, rm)
        .iter()
        .map(|a| a.truncated(horizon))
        .collect();
    if cfg.optimizer == Optimizer::Lbfgs {
        if cfg.mode != PlanningMode::FiniteHorizon || !model.is_deterministic() {
            return Err(IrlError::Config(
                "L-BFGS needs finite-horizon planning on a deterministic model".into(),
            ));
        }
        let ragged = aug.iter().any(|a| {
            a.traj.len() < horizon && !a.traj.obs.last().is_some_and(|&o| model.is_terminal(o))
        });
        if ragged {
            return Err(IrlError::Config(
                "L-BFGS needs demonstrations that span the horizon or end in game-over".into(),
            ));
        }
    }
    let mu_d = expert_svf(&aug, n_u, planning.num_obs()).scaled(1.0 / demos.len() as f64);
    let scfg = soft_config(cfg, horizon);

    let mut theta = ThetaParams::zeros(n_u, width);
    for &(u, l) in &hints.entries {
        for i in l.iter() {
            theta.set(u, i, cfg.init_bonus);
        }
    }
    let mut adam = Adam::new(n_u * width);
    let mut mc_rng = stream(seed, "irl", 0);
    let mut interactions: u64 = 0;
    let mut curve = Vec::with_capacity(cfg.iterations);
    let mut lbfgs = Lbfgs::new(cfg.lbfgs_memory);
    let mut pi = soft_value_iteration(&product, &theta.product_rewards(&planning), &scfg)?;
    for m in 1..=cfg.iterations {
        let learned = LearnedPolicy::Soft {
            rm: rm.structure(),
            pi,
            num_obs: planning.num_obs(),
        };
        curve.push(CurvePoint {
            irl_step: m,
            env_interactions: interactions,
            avg_return: eval(&learned),
        });
        let LearnedPolicy::Soft { pi: current, .. } = learned else {
            unreachable!()
        };
        pi = current;
        if m == cfg.iterations {
            break;
        }
        let mu_pi = match cfg.svf {
            SvfMethod::Exact => policy_svf(&product, &pi),
            SvfMethod::MonteCarlo => {
                interactions += (cfg.mc_rollouts * horizon) as u64;
                policy_svf_monte_carlo(&product, &pi, cfg.mc_rollouts, &mut mc_rng)
            }
        };
        let g = maxent_gradient(&mu_d, &mu_pi, planning.labels(), width)?;
        let lr = if cfg.lr_decay {
            cfg.learning_rate / (m as f64).sqrt()
        } else {
            cfg.learning_rate
        };
        match cfg.optimizer {
            Optimizer::Adam => adam.step(theta.as_mut_slice(), g.as_slice(), lr),
            Optimizer::GradientAscent => {
                for (w, d) in theta.as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *w += lr * d;
                }
            }
            Optimizer::Lbfgs => {
                lbfgs.observe(&theta, &g);
                let mut d = lbfgs.direction(g.as_slice());
                let slope: f64 = d.iter().zip(g.as_slice()).map(|(a, b)| a * b).sum();
                if slope.is_nan() || slope <= 0.0 {
                    lbfgs.reset();
                    d = g.as_slice().to_vec();
                }
                // without curvature history, no weight moves by more than the learning rate
                let alpha = if lbfgs.is_empty() { cfg.learning_rate / max_abs(&d).max(1e-12) } else { 1.0 };
                match armijo(&product, &planning, &aug, &theta, &pi, g.as_slice(), &d, alpha, &scfg)? {
                    Some((t, p)) => {
                        theta = t;
                        pi = p;
                    }
                    None => lbfgs.reset(),
                }
                continue;
            }
        }
        if !theta.is_finite() {
            return Err(IrlError::NonFinite("weights"));
        }
        pi = soft_value_iteration(&product, &theta.product_rewards(&planning), &scfg)?;
    }
    let policy = LearnedPolicy::Soft {
        rm: rm.structure(),
        pi,
        num_obs: planning.num_obs(),
    };
    let rm_out = rm.structure().with_weights(theta.rows())?;
    Ok(TrainOutcome {
        theta,
        rm: rm_out,
        curve,
        policy,
        interactions,
        motif: None,
    })
}

const ARMIJO_C: f64 = 1e-4;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
const MAX_BACKTRACKS: usize = 40;

/// Curvature history for L-BFGS on a concave objective.
struct Lbfgs {
    memory: usize,
    pairs: std::collections::VecDeque<(Vec<f64>, Vec<f64>)>,
    last: Option<(Vec<f64>, Vec<f64>)>,
}

impl Lbfgs {
    fn new(memory: usize) -> Self {
        Lbfgs {
            memory,
            pairs: Default::default(),
            last: None,
        }
    }

    fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn reset(&mut self) {
        self.pairs.clear();
        self.last = None;
    }

    /// Records the weights and gradient of a new iterate.
    fn observe(&mut self, theta: &ThetaParams, g: &ThetaParams) {
        let x = theta.as_slice().to_vec();
        let gv = g.as_slice().to_vec();
        if let Some((px, pg)) = self.last.take() {
            let sv: Vec<f64> = x.iter().zip(&px).map(|(a, b)| a - b).collect();
            // ascent gradients: y = g_prev - g is the descent-form difference
            let yv: Vec<f64> = pg.iter().zip(&gv).map(|(a, b)| a - b).collect();
            let sy: f64 = sv.iter().zip(&yv).map(|(a, b)| a * b).sum();
            if self.memory > 0 && sy > 1e-12 {
                if self.pairs.len() == self.memory {
                    self.pairs.pop_front();
                }
                self.pairs.push_back((sv, yv));
            }
        }
        self.last = Some((x, gv));
    }

    /// Two-loop recursion: approximate inverse-Hessian times `g`.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (sv, yv) in self.pairs.iter().rev() {
            let rho = 1.0 / dot(yv, sv);
            let a = rho * dot(sv, &q);
            q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push((a, rho));
        }
        if let Some((sv, yv)) = self.pairs.back() {
            let gamma = dot(sv, yv) / dot(yv, yv);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((sv, yv), &(a, rho)) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(yv, &q);
            q.iter_mut().zip(sv).for_each(|(qi, si)| *qi += si * (a - b));
        }
        q
    }
}

/// Backtracking line search along ascent direction `d` from step `alpha`.
/// Returns the accepted weights with their policy, or `None` when no step
/// satisfies the sufficient-increase condition.
#[allow(clippy::too_many_arguments)]
fn armijo(
    product: &ProductModel,
    planning: &TabularModel,
    aug: &[crate::motif::AugmentedTrajectory],
    theta: &ThetaParams,
    pi: &SoftPolicy,
    g: &[f64],
    d: &[f64],
    mut alpha: f64,
    scfg: &SoftConfig,
) -> Result<Option<(ThetaParams, SoftPolicy)>, IrlError> {
    let ll0 = log_likelihood(product, &theta.product_rewards(planning), pi, aug)?;
    let slope: f64 = g.iter().zip(d).map(|(a, b)| a * b).sum();
    if slope.is_nan() || slope <= 0.0 {
        return Ok(None);
    }
    for _ in 0..MAX_BACKTRACKS {
        let mut cand = theta.clone();
        for (w, di) in cand.as_mut_slice().iter_mut().zip(d) {
            *w += alpha * di;
        }
        let rewards = cand.product_rewards(planning);
        let p = soft_value_iteration(product, &rewards, scfg)?;
        let ll = log_likelihood(product, &rewards, &p, aug)?;
        if ll.is_finite() && ll >= ll0 + ARMIJO_C * alpha * slope {
            log::debug!("line search: step {alpha:.3e}, log-likelihood {ll0:.6} -> {ll:.6}");
            return Ok(Some((cand, p)));
        }
        alpha *= 0.5;
    }
    Ok(None)
}

/// Soft policy for the weights attached to `rm`, planned exactly as training
/// plans. Lets a saved machine be re-evaluated without the demonstrations.
pub fn plan_from_weights(
    model: &TabularModel,
    rm: &RewardMachine,
    cfg: &IrlConfig,
) -> Result<LearnedPolicy, IrlError> {
    cfg.validate()?;
    if rm.vocab() != model.vocab() {
        return Err(IrlError::Vocabulary);
    }
    let horizon = cfg
        .horizon
        .ok_or_else(|| IrlError::Config("planning a saved machine needs an explicit horizon".into()))?;
    let rows = rm
        .weights()
        .ok_or_else(|| IrlError::Config("machine carries no weights".into()))?;
    let theta = ThetaParams::from_rows(rows)?;
    let planning = model.with_dead_end();
    let product = ProductModel::build(&planning, rm);
    let pi = soft_value_iteration(&product, &theta.product_rewards(&planning), &soft_config(cfg, horizon))?;
    Ok(LearnedPolicy::Soft {
        rm: rm.structure(),
        pi,
        num_obs: planning.num_obs(),
    })
}

/// Learns a motif by tabu search, then runs MaxEnt IRL on the product.
pub fn smirl_train(
    demos: &Dataset,
    model: &TabularModel,
    search: &SearchConfig,
    cfg: &IrlConfig,
    seed: u64,
    eval: &mut dyn FnMut(&LearnedPolicy) -> f64,
) -> Result<TrainOutcome, IrlError> {
    let motif = learn_motif(demos, search)?;
    smirl_with_motif(demos, model, motif, cfg, seed, eval)
}

/// SMIRL with an already learned (or given) motif.
pub fn smirl_with_motif(
    demos: &Dataset,
    model: &TabularModel,
    motif: LearnedMotif,
    cfg: &IrlConfig,
    seed: u64,
    eval: &mut dyn FnMut(&LearnedPolicy) -> f64,
) -> Result<TrainOutcome, IrlError> {
    let aug = augment_traces(demos, &motif.rm);
    let hints = infer_reward_states(&motif.rm, &aug);
    let mut out = maxent_on_motif(demos, model, &motif.rm, &hints, cfg, seed, eval)?;
    out.motif = Some(motif);
    Ok(out)
}

/// MaxEnt IRL on raw observations: the one-state motif, no reward hints.
pub fn maxent_baseline_train(
    demos: &Dataset,
    model: &TabularModel,
    cfg: &IrlConfig,
    seed: u64,
    eval: &mut dyn FnMut(&LearnedPolicy) -> f64,
) -> Result<TrainOutcome, IrlError> {
    let rm = RewardMachine::trivial(model.vocab().clone());
    maxent_on_motif(demos, model, &rm, &RewardStates::default(), cfg, seed, eval)
}
