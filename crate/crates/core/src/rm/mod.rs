//! Reward machines: finite-state motifs driven by label sets.
//!
//! A machine replays a label sequence deterministically. Transitions that are
//! not stored explicitly are self-loops, so `step` is total. Entering a
//! terminal state emits a reward event and the machine re-enters its initial
//! state, which lets patrol and delivery tasks repeat without an episode reset.

mod label;
mod product;
mod text;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use label::{LabelSet, Vocabulary, MAX_SYMBOLS};
pub use product::ProductModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RmError {
    #[error("state {state} out of range for a machine with {num_states} states")]
    InvalidState { state: usize, num_states: usize },
    #[error("reward machine has no weights")]
    MissingWeights,
    #[error("weight table has shape {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    WeightShape {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("label set {0} uses symbols outside the vocabulary")]
    LabelOutOfVocabulary(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("invalid symbol `{0}`")]
    InvalidSymbol(String),
    #[error("vocabulary is limited to {MAX_SYMBOLS} symbols")]
    VocabularyFull,
    #[error("a reward machine needs at least one state")]
    NoStates,
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Result of one machine transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RmStep {
    /// State occupied after the step (the initial state after a goal entry).
    pub next: usize,
    /// True when the stored target was a terminal state.
    pub goal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardMachine {
    vocab: Vocabulary,
    num_states: usize,
    initial: usize,
    transitions: BTreeMap<(usize, LabelSet), usize>,
    terminal: BTreeSet<usize>,
    weights: Option<Vec<Vec<f64>>>,
}

impl RewardMachine {
    /// Machine with `num_states` states, initial state 0 and only self-loops.
    pub fn new(vocab: Vocabulary, num_states: usize) -> Result<Self, RmError> {
        if num_states == 0 {
            return Err(RmError::NoStates);
        }
        Ok(RewardMachine {
            vocab,
            num_states,
            initial: 0,
            transitions: BTreeMap::new(),
            terminal: BTreeSet::new(),
            weights: None,
        })
    }

    /// The one-state machine; every label sequence replays to `[u0, u0, ...]`.
    pub fn trivial(vocab: Vocabulary) -> Self {
        Self::new(vocab, 1).expect("one state")
    }

    pub fn with_initial(mut self, u: usize) -> Result<Self, RmError> {
        self.check_state(u)?;
        self.initial = u;
        Ok(self)
    }

    pub fn with_transition(mut self, from: usize, label: LabelSet, to: usize) -> Result<Self, RmError> {
        self.set_transition(from, label, to)?;
        Ok(self)
    }

    pub fn with_terminal(mut self, u: usize) -> Result<Self, RmError> {
        self.check_state(u)?;
        self.terminal.insert(u);
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<Vec<f64>>) -> Result<Self, RmError> {
        self.set_weights(Some(weights))?;
        Ok(self)
    }

    pub fn set_transition(&mut self, from: usize, label: LabelSet, to: usize) -> Result<(), RmError> {
        self.check_state(from)?;
        self.check_state(to)?;
        if !label.fits(self.vocab.len()) {
            return Err(RmError::LabelOutOfVocabulary(label.to_string()));
        }
        if from == to {
            // self-loops are the default; keep the table sparse
            self.transitions.remove(&(from, label));
        } else {
            self.transitions.insert((from, label), to);
        }
        Ok(())
    }

    pub fn set_weights(&mut self, weights: Option<Vec<Vec<f64>>>) -> Result<(), RmError> {
        if let Some(w) = &weights {
            let width = self.vocab.len();
            if w.len() != self.num_states || w.iter().any(|row| row.len() != width) {
                return Err(RmError::WeightShape {
                    rows: w.len(),
                    cols: w.first().map_or(0, Vec::len),
                    expected_rows: self.num_states,
                    expected_cols: width,
                });
            }
        }
        self.weights = weights;
        Ok(())
    }

    fn check_state(&self, u: usize) -> Result<(), RmError> {
        if u < self.num_states {
            Ok(())
        } else {
            Err(RmError::InvalidState {
                state: u,
                num_states: self.num_states,
            })
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initial_state(&self) -> usize {
        self.initial
    }

    pub fn terminal_states(&self) -> &BTreeSet<usize> {
        &self.terminal
    }

    pub fn is_terminal(&self, u: usize) -> bool {
        self.terminal.contains(&u)
    }

    pub fn weights(&self) -> Option<&[Vec<f64>]> {
        self.weights.as_deref()
    }

    /// Explicit (non-self-loop) transitions in `(from, label) -> to` order.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, LabelSet, usize)> + '_ {
        self.transitions.iter().map(|(&(u, l), &v)| (u, l, v))
    }

    /// Stored target of `(u, l)` before terminal resolution.
    pub fn raw_target(&self, u: usize, l: LabelSet) -> usize {
        self.transitions.get(&(u, l)).copied().unwrap_or(u)
    }

    pub fn transition(&self, u: usize, l: LabelSet) -> Result<RmStep, RmError> {
        self.check_state(u)?;
        let target = self.raw_target(u, l);
        Ok(if self.terminal.contains(&target) {
            RmStep {
                next: self.initial,
                goal: true,
            }
        } else {
            RmStep {
                next: target,
                goal: false,
            }
        })
    }

    pub fn step(&self, u: usize, l: LabelSet) -> Result<usize, RmError> {
        self.transition(u, l).map(|s| s.next)
    }

    /// States visited while consuming `labels`; the output has one more
    /// element than the input and starts at the initial state.
    pub fn replay(&self, labels: &[LabelSet]) -> Vec<usize> {
        let mut states = Vec::with_capacity(labels.len() + 1);
        let mut u = self.initial;
        states.push(u);
        for &l in labels {
            u = self.step(u, l).expect("replay stays in range");
            states.push(u);
        }
        states
    }

    /// Number of reward events produced while consuming `labels`.
    pub fn count_goals(&self, labels: &[LabelSet]) -> usize {
        let mut u = self.initial;
        let mut goals = 0;
        for &l in labels {
            let s = self.transition(u, l).expect("replay stays in range");
            goals += usize::from(s.goal);
            u = s.next;
        }
        goals
    }

    /// Label-linear state reward `w_u . L`.
    pub fn reward(&self, u: usize, l: LabelSet) -> Result<f64, RmError> {
        self.check_state(u)?;
        let w = self.weights.as_ref().ok_or(RmError::MissingWeights)?;
        Ok(l.dot(&w[u]))
    }

    /// Same transition structure, no weights.
    pub fn structure(&self) -> RewardMachine {
        RewardMachine {
            weights: None,
            ..self.clone()
        }
    }

    pub fn to_text(&self) -> String {
        text::write(self)
    }

    /// Parses the text format. `fallback` supplies the vocabulary when the
    /// text has no `vocab` line.
    pub fn from_text(input: &str, fallback: &Vocabulary) -> Result<Self, RmError> {
        text::parse(input, fallback)
    }

    pub fn to_dot(&self) -> String {
        text::dot(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::office()
    }

    fn l(v: &Vocabulary, s: &[&str]) -> LabelSet {
        v.label_set(s).unwrap()
    }

    /// Task-4 patrol: A -> B -> C -> D, then the goal entry loops back.
    fn patrol(v: &Vocabulary) -> RewardMachine {
        RewardMachine::new(v.clone(), 5)
            .unwrap()
            .with_transition(0, l(v, &["A"]), 1)
            .unwrap()
            .with_transition(1, l(v, &["B"]), 2)
            .unwrap()
            .with_transition(2, l(v, &["C"]), 3)
            .unwrap()
            .with_transition(3, l(v, &["D"]), 4)
            .unwrap()
            .with_terminal(4)
            .unwrap()
    }

    #[test]
    fn step_follows_stored_transition() {
        let v = vocab();
        let rm = patrol(&v);
        assert_eq!(rm.step(0, l(&v, &["A"])).unwrap(), 1);
    }

    #[test]
    fn missing_transition_is_self_loop() {
        let v = vocab();
        let rm = patrol(&v);
        for u in 0..4 {
            assert_eq!(rm.step(u, LabelSet::EMPTY).unwrap(), u);
        }
        let one = RewardMachine::trivial(v.clone());
        assert_eq!(one.step(0, l(&v, &["c", "o"])).unwrap(), 0);
    }

    #[test]
    fn step_rejects_bad_state() {
        let rm = RewardMachine::trivial(vocab());
        assert_eq!(
            rm.step(3, LabelSet::EMPTY),
            Err(RmError::InvalidState {
                state: 3,
                num_states: 1
            })
        );
    }

    #[test]
    fn replay_examples() {
        let v = vocab();
        let rm = patrol(&v);
        assert_eq!(rm.replay(&[]), vec![0]);
        let seq = [l(&v, &["A"]), l(&v, &["B"]), l(&v, &["C"]), l(&v, &["D"])];
        assert_eq!(rm.replay(&seq), vec![0, 1, 2, 3, 0]);
        assert_eq!(rm.count_goals(&seq), 1);

        let two = RewardMachine::new(v.clone(), 2)
            .unwrap()
            .with_transition(0, l(&v, &["c"]), 1)
            .unwrap();
        let seq = [LabelSet::EMPTY, l(&v, &["c"]), LabelSet::EMPTY];
        assert_eq!(two.replay(&seq), vec![0, 0, 1, 1]);
    }

    #[test]
    fn reward_is_dot_product() {
        let v = vocab();
        let mut w = vec![vec![0.0; v.len()]; 2];
        let rm = RewardMachine::new(v.clone(), 2).unwrap();
        assert_eq!(rm.reward(0, LabelSet::EMPTY), Err(RmError::MissingWeights));

        let zero = rm.clone().with_weights(w.clone()).unwrap();
        assert_eq!(zero.reward(1, l(&v, &["A", "o"])).unwrap(), 0.0);

        w[0][v.index_of("o").unwrap()] = 1.0;
        w[1][v.index_of("c").unwrap()] = 0.5;
        w[1][v.index_of("o").unwrap()] = 0.25;
        let rm = rm.with_weights(w).unwrap();
        assert_eq!(rm.reward(0, l(&v, &["o"])).unwrap(), 1.0);
        assert_eq!(rm.reward(1, l(&v, &["c", "o"])).unwrap(), 0.75);
    }

    #[test]
    fn weight_shape_is_checked() {
        let rm = RewardMachine::new(vocab(), 2).unwrap();
        assert!(rm.clone().with_weights(vec![vec![0.0; 8]]).is_err());
        assert!(rm.with_weights(vec![vec![0.0; 7]; 2]).is_err());
    }

    #[test]
    fn transition_targets_are_validated() {
        let v = vocab();
        let rm = RewardMachine::new(v.clone(), 2).unwrap();
        assert!(rm.clone().with_transition(0, l(&v, &["c"]), 2).is_err());
        assert!(rm.with_transition(0, LabelSet::singleton(12), 1).is_err());
    }
}
