use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::expert::{Dataset, Trajectory};
use crate::rm::{LabelSet, RewardMachine};

/// A trajectory annotated with the machine state paired with each
/// observation; `states[t]` is the state after consuming `L(o_1..o_t)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedTrajectory {
    pub traj: Trajectory,
    pub states: Vec<usize>,
}

impl AugmentedTrajectory {
    /// The first `steps` actions (and `steps + 1` observations).
    pub fn truncated(&self, steps: usize) -> AugmentedTrajectory {
        if self.traj.len() <= steps {
            return self.clone();
        }
        let t = &self.traj;
        AugmentedTrajectory {
            traj: Trajectory {
                obs: t.obs[..=steps].to_vec(),
                acts: t.acts[..steps].to_vec(),
                labels: t.labels[..=steps].to_vec(),
            },
            states: self.states[..=steps].to_vec(),
        }
    }
}

pub fn augment_trajectory(traj: &Trajectory, rm: &RewardMachine) -> AugmentedTrajectory {
    let states = rm.replay(traj.labels.get(1..).unwrap_or(&[]));
    AugmentedTrajectory {
        traj: traj.clone(),
        states,
    }
}

pub fn augment_traces(data: &Dataset, rm: &RewardMachine) -> Vec<AugmentedTrajectory> {
    data.trajectories
        .iter()
        .map(|t| augment_trajectory(t, rm))
        .collect()
}

/// Machine states the demonstrations settle in, with the labels on which
/// they were entered.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RewardStates {
    pub states: BTreeSet<usize>,
    /// `(entered state, label)` pairs observed on entry.
    pub entries: BTreeSet<(usize, LabelSet)>,
}

/// Reward-state inference: builds the graph of machine transitions actually
/// taken by the demonstrations and returns the sink components (no used edge
/// leaves them) that do not contain the initial state. Demonstrations only
/// ever end in such states once they enter them, which marks their entry
/// labels as the likely reward condition.
pub fn infer_reward_states(rm: &RewardMachine, aug: &[AugmentedTrajectory]) -> RewardStates {
    let mut graph: DiGraph<usize, ()> = DiGraph::new();
    let mut nodes = BTreeMap::new();
    let mut node = |g: &mut DiGraph<usize, ()>, u: usize| *nodes.entry(u).or_insert_with(|| g.add_node(u));
    let mut used = BTreeSet::new();
    for a in aug {
        for (k, w) in a.states.windows(2).enumerate() {
            let (x, y) = (node(&mut graph, w[0]), node(&mut graph, w[1]));
            if w[0] != w[1] {
                used.insert((w[0], w[1], a.traj.labels[k + 1]));
                if graph.find_edge(x, y).is_none() {
                    graph.add_edge(x, y, ());
                }
            }
        }
        if let Some(&u) = a.states.first() {
            node(&mut graph, u);
        }
    }
    let mut out = RewardStates::default();
    for scc in tarjan_scc(&graph) {
        let members: BTreeSet<usize> = scc.iter().map(|&n| graph[n]).collect();
        if members.contains(&rm.initial_state()) {
            continue;
        }
        let leaves = scc
            .iter()
            .any(|&n| graph.neighbors(n).any(|m| !members.contains(&graph[m])));
        if leaves {
            continue;
        }
        out.states.extend(&members);
        for &(from, to, l) in &used {
            if members.contains(&to) && !members.contains(&from) {
                out.entries.insert((to, l));
            }
        }
    }
    out
}
