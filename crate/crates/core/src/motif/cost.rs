use std::collections::{BTreeMap, BTreeSet};

use crate::expert::Dataset;
use crate::rm::{LabelSet, RewardMachine, Vocabulary};

use super::MotifError;

/// Successor label sets per `(machine state, label)` with visit counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NextObsSets {
    pub sets: BTreeMap<(usize, LabelSet), (BTreeSet<LabelSet>, u64)>,
}

impl NextObsSets {
    /// Replays every trajectory: the step at time `t` pairs the machine state
    /// `x_t` and `L(o_t)` with the successor label `L(o_{t+1})`.
    pub fn build(rm: &RewardMachine, data: &Dataset) -> NextObsSets {
        let mut sets: BTreeMap<(usize, LabelSet), (BTreeSet<LabelSet>, u64)> = BTreeMap::new();
        for traj in &data.trajectories {
            let mut u = rm.initial_state();
            for w in traj.labels.windows(2) {
                let e = sets.entry((u, w[0])).or_default();
                e.0.insert(w[1]);
                e.1 += 1;
                u = rm.step(u, w[1]).expect("machine state in range");
            }
        }
        NextObsSets { sets }
    }

    pub fn cost(&self) -> f64 {
        cost_from_counts(self.sets.values().map(|(s, c)| (s.len(), *c)))
    }
}

/// `sum count * ln |N|`, accumulated per set size and summed in ascending
/// size order so that equal multisets give bit-identical costs whatever the
/// state numbering.
pub(crate) fn cost_from_counts(pairs: impl Iterator<Item = (usize, u64)>) -> f64 {
    let mut hist: BTreeMap<usize, u64> = BTreeMap::new();
    for (size, count) in pairs {
        if size > 1 && count > 0 {
            *hist.entry(size).or_default() += count;
        }
    }
    // fold from +0.0: an empty f64 sum is -0.0
    hist.iter().fold(0.0, |acc, (&s, &c)| acc + c as f64 * (s as f64).ln())
}

/// Structure cost of `rm` on `data`: the sum over every visited step of the
/// log-cardinality of that step's successor-label set.
pub fn rm_cost(rm: &RewardMachine, data: &Dataset) -> f64 {
    NextObsSets::build(rm, data).cost()
}

/// Demonstrations reduced to sequences over the distinct label sets they use.
#[derive(Debug, Clone)]
pub struct Traces {
    vocab: Vocabulary,
    alphabet: Vec<LabelSet>,
    seqs: Vec<Vec<u8>>,
    /// Alphabet indices whose transitions the search may change.
    free: Vec<usize>,
}

/// The fast cost path keeps successor sets as `u64` bitmasks.
pub const MAX_ALPHABET: usize = 64;

impl Traces {
    /// All label sets, the empty one included, may trigger transitions.
    pub fn new(data: &Dataset) -> Result<Traces, MotifError> {
        Self::with_options(data, false)
    }

    /// With `empty_self_loop`, transitions on the empty label set are pinned
    /// to self-loops: the machine only moves on events.
    pub fn with_options(data: &Dataset, empty_self_loop: bool) -> Result<Traces, MotifError> {
        let distinct: BTreeSet<LabelSet> = data
            .trajectories
            .iter()
            .flat_map(|t| t.labels.iter().copied())
            .collect();
        if distinct.len() > MAX_ALPHABET {
            return Err(MotifError::AlphabetTooLarge(distinct.len()));
        }
        let alphabet: Vec<LabelSet> = distinct.into_iter().collect();
        let index: BTreeMap<LabelSet, u8> = alphabet
            .iter()
            .enumerate()
            .map(|(i, &l)| (l, i as u8))
            .collect();
        let seqs = data
            .trajectories
            .iter()
            .map(|t| t.labels.iter().map(|l| index[l]).collect())
            .collect();
        let free = (0..alphabet.len())
            .filter(|&i| !(empty_self_loop && alphabet[i].is_empty()))
            .collect();
        Ok(Traces {
            vocab: data.vocab.clone(),
            alphabet,
            seqs,
            free,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn alphabet(&self) -> &[LabelSet] {
        &self.alphabet
    }

    pub fn num_labels(&self) -> usize {
        self.alphabet.len()
    }

    /// Alphabet indices with searchable transitions; the rest self-loop.
    pub fn free_labels(&self) -> &[usize] {
        &self.free
    }

    pub fn is_free(&self, l: usize) -> bool {
        self.free.binary_search(&l).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.iter().all(|s| s.len() < 2)
    }

    pub fn num_steps(&self) -> usize {
        self.seqs.iter().map(|s| s.len().saturating_sub(1)).sum()
    }
}

/// Dense transition table over the trace alphabet, initial state 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Structure {
    pub(crate) n: usize,
    pub(crate) labels: usize,
    pub(crate) delta: Vec<u8>,
}

impl Structure {
    pub fn trivial(labels: usize) -> Structure {
        Structure {
            n: 1,
            labels,
            delta: vec![0; labels],
        }
    }

    pub fn from_table(n: usize, labels: usize, delta: Vec<u8>) -> Structure {
        assert_eq!(delta.len(), n * labels);
        assert!(delta.iter().all(|&d| (d as usize) < n));
        Structure { n, labels, delta }
    }

    /// Effective dynamics of `rm` restricted to the trace alphabet.
    pub fn from_rm(rm: &RewardMachine, traces: &Traces) -> Structure {
        assert!(rm.initial_state() == 0, "structures start in state 0");
        let labels = traces.num_labels();
        let mut delta = Vec::with_capacity(rm.num_states() * labels);
        for u in 0..rm.num_states() {
            for &l in traces.alphabet() {
                delta.push(rm.step(u, l).expect("state in range") as u8);
            }
        }
        Structure {
            n: rm.num_states(),
            labels,
            delta,
        }
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn target(&self, u: usize, l: usize) -> usize {
        self.delta[u * self.labels + l] as usize
    }

    pub fn cost(&self, traces: &Traces) -> f64 {
        let k = self.n * self.labels;
        let mut masks = vec![0u64; k];
        let mut counts = vec![0u64; k];
        let l = self.labels;
        for seq in &traces.seqs {
            let mut u = 0usize;
            for w in seq.windows(2) {
                let key = u * l + w[0] as usize;
                masks[key] |= 1u64 << w[1];
                counts[key] += 1;
                u = self.delta[u * l + w[1] as usize] as usize;
            }
        }
        cost_from_counts(
            masks
                .iter()
                .zip(&counts)
                .map(|(m, &c)| (m.count_ones() as usize, c)),
        )
    }

    /// Relabels states in breadth-first order from state 0 (labels scanned in
    /// alphabet order) and drops unreachable states. Cost-preserving.
    pub fn canonical(&self) -> Structure {
        let mut order = vec![u8::MAX; self.n];
        let mut queue = vec![0usize];
        order[0] = 0;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for l in 0..self.labels {
                let v = self.target(u, l);
                if order[v] == u8::MAX {
                    order[v] = queue.len() as u8;
                    queue.push(v);
                }
            }
        }
        let n = queue.len();
        let mut delta = vec![0u8; n * self.labels];
        for (new_u, &old_u) in queue.iter().enumerate() {
            for l in 0..self.labels {
                delta[new_u * self.labels + l] = order[self.target(old_u, l)];
            }
        }
        Structure {
            n,
            labels: self.labels,
            delta,
        }
    }

    /// Resets every transition the traces never take to a self-loop, then
    /// canonicalizes. Replays, and therefore the cost, are unchanged.
    pub fn pruned(&self, traces: &Traces) -> Structure {
        let l = self.labels;
        let mut used = vec![false; self.n * l];
        for seq in &traces.seqs {
            let mut u = 0usize;
            for &next in seq.iter().skip(1) {
                let key = u * l + next as usize;
                used[key] = true;
                u = self.delta[key] as usize;
            }
        }
        let delta = (0..self.n * l)
            .map(|k| if used[k] { self.delta[k] } else { (k / l) as u8 })
            .collect();
        Structure {
            n: self.n,
            labels: l,
            delta,
        }
        .canonical()
    }

    pub fn to_rm(&self, traces: &Traces) -> RewardMachine {
        let mut rm = RewardMachine::new(traces.vocab().clone(), self.n).expect("at least one state");
        for u in 0..self.n {
            for (li, &l) in traces.alphabet().iter().enumerate() {
                rm.set_transition(u, l, self.target(u, li))
                    .expect("targets are in range and labels come from the vocabulary");
            }
        }
        rm
    }
}
