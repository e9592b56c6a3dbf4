//! Shared generators for the integration suites.
#![allow(dead_code)]

use proptest::prelude::*;

use smirl::expert::{Dataset, Trajectory};
use smirl::irl::{
    maxent_baseline_train, policy_svf, smirl_train, soft_value_iteration, IrlConfig, LearnedPolicy, Optimizer,
    PlanningMode, SoftConfig,
};
use smirl::motif::SearchConfig;
use smirl::{LabelSet, ProductModel, RewardMachine, TabularModel, Vocabulary};

pub const WIDTH: usize = 3;

pub fn vocab() -> Vocabulary {
    Vocabulary::new(&["a", "b", "c"]).unwrap()
}

/// Random base model: `n` observations, 2 actions, rows with one or two
/// successors, labels over three symbols.
pub fn model_strategy() -> impl Strategy<Value = TabularModel> {
    (2usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec((0..n, 0..n, 0.0f64..1.0, any::<bool>()), n * 2),
            prop::collection::vec(0u64..(1 << WIDTH), n),
            prop::collection::vec(0.01f64..1.0, n),
        )
            .prop_map(move |(rows, labels, init)| {
                let succ = rows
                    .into_iter()
                    .map(|(a, b, p, two)| {
                        if two && a != b {
                            vec![(a, p), (b, 1.0 - p)]
                        } else {
                            vec![(a, 1.0)]
                        }
                    })
                    .collect();
                let z: f64 = init.iter().sum();
                let init = init.into_iter().map(|p| p / z).collect();
                let labels = labels.into_iter().map(LabelSet::from_bits).collect();
                TabularModel::new(vocab(), 2, succ, init, labels, vec![false; n]).unwrap()
            })
    })
}

/// Random machine with up to 3 states over the three-symbol vocabulary.
pub fn rm_strategy() -> impl Strategy<Value = RewardMachine> {
    (1usize..4).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0u64..(1 << WIDTH), 0..n), 0..8).prop_map(move |edges| {
            let mut rm = RewardMachine::new(vocab(), n).unwrap();
            for (u, l, v) in edges {
                rm.set_transition(u, LabelSet::from_bits(l), v).unwrap();
            }
            rm
        })
    })
}

pub fn label_seq() -> impl Strategy<Value = Vec<LabelSet>> {
    prop::collection::vec((0u64..(1 << WIDTH)).prop_map(LabelSet::from_bits), 0..30)
}

pub fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    prop::collection::vec(prop::collection::vec(0u64..(1 << WIDTH), 2..25), 1..5).prop_map(|seqs| {
        let trajectories = seqs
            .into_iter()
            .map(|s| {
                let n = s.len();
                Trajectory {
                    obs: vec![0; n],
                    acts: vec![0; n - 1],
                    labels: s.into_iter().map(LabelSet::from_bits).collect(),
                }
            })
            .collect();
        Dataset::new(vocab(), trajectories)
    })
}


/// Deterministic model with a single start observation (index 0).
pub fn deterministic_model_strategy() -> impl Strategy<Value = TabularModel> {
    (2usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(0..n, n * 2),
            prop::collection::vec(0u64..(1 << WIDTH), n),
        )
            .prop_map(move |(next, labels)| {
                let succ = next.into_iter().map(|o| vec![(o, 1.0)]).collect();
                let mut init = vec![0.0; n];
                init[0] = 1.0;
                let labels = labels.into_iter().map(LabelSet::from_bits).collect();
                TabularModel::new(vocab(), 2, succ, init, labels, vec![false; n]).unwrap()
            })
    })
}

/// Rolls fixed action sequences through a deterministic model from its start.
pub fn walk(model: &TabularModel, actions: &[Vec<usize>]) -> Dataset {
    let start = model.initial().iter().position(|&p| p > 0.0).unwrap();
    let trajectories = actions
        .iter()
        .map(|acts| {
            let mut obs = vec![start];
            for &a in acts {
                obs.push(model.successors(*obs.last().unwrap(), a)[0].0);
            }
            Trajectory {
                labels: obs.iter().map(|&o| model.label(o)).collect(),
                obs,
                acts: acts.clone(),
            }
        })
        .collect();
    Dataset::new(model.vocab().clone(), trajectories)
}

/// Demonstration action sequences that all span `horizon` steps.
pub fn action_seqs(horizon: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0usize..2, horizon), 1..4)
}

pub fn check_svf_conservation(
    model: &TabularModel,
    rm: &RewardMachine,
    horizon: usize,
    seed: &[f64],
    discounted: bool,
) -> Result<(), TestCaseError> {
    let p = ProductModel::build(model, rm);
    let rewards: Vec<f64> = (0..p.num_states()).map(|x| seed[x % seed.len()]).collect();
    let cfg = SoftConfig {
        horizon,
        mode: if discounted { PlanningMode::Discounted } else { PlanningMode::FiniteHorizon },
        gamma: 0.8,
        tolerance: 1e-10,
        max_sweeps: 100_000,
    };
    let pi = soft_value_iteration(&p, &rewards, &cfg).unwrap();
    for t in 0..horizon {
        for x in 0..p.num_states() {
            let s: f64 = pi.probs(t, x).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }
    let svf = policy_svf(&p, &pi);
    prop_assert!((svf.total() - (horizon + 1) as f64).abs() < 1e-9);
    prop_assert!(svf.as_slice().iter().all(|&v| v >= 0.0));
    Ok(())
}

/// SMIRL on a forced one-state motif must match the observation-only
/// baseline step for step.
pub fn check_baseline_embedding(
    model: &TabularModel,
    acts: &[Vec<usize>],
    optimizer: Optimizer,
    seed: u64,
) -> Result<(), TestCaseError> {
    let demos = walk(model, acts);
    let cfg = IrlConfig {
        iterations: 4,
        optimizer,
        horizon: Some(acts[0].len()),
        ..IrlConfig::default()
    };
    // the score depends on the whole first-step policy, so any divergence shows up
    let score = |p: &LearnedPolicy| -> f64 {
        (0..model.num_obs()).map(|o| (p.act(0, p.initial_state(), o) * (o + 1)) as f64).sum()
    };
    let base = maxent_baseline_train(&demos, model, &cfg, seed, &mut |p| score(p)).unwrap();
    let search = SearchConfig {
        u_max: 1,
        restarts: 1,
        max_iterations: 1,
        seed,
        ..SearchConfig::default()
    };
    let smirl = smirl_train(&demos, model, &search, &cfg, seed, &mut |p| score(p)).unwrap();
    prop_assert_eq!(smirl.rm.num_states(), 1);
    prop_assert_eq!(&base.theta, &smirl.theta);
    prop_assert_eq!(&base.curve, &smirl.curve);
    prop_assert_eq!(base.interactions, smirl.interactions);
    Ok(())
}

pub fn optimizer_strategy() -> impl Strategy<Value = Optimizer> {
    prop_oneof![
        Just(Optimizer::Lbfgs),
        Just(Optimizer::Adam),
        Just(Optimizer::GradientAscent)
    ]
}
