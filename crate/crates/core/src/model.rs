//! Enumerated tabular models shared by the simulator, planners and IRL.

use thiserror::Error;

use crate::rm::{LabelSet, Vocabulary};

const ROW_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model needs at least one observation and one action")]
    Empty,
    #[error("expected {expected} {what}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("transition row ({obs}, {action}) sums to {sum}")]
    RowSum { obs: usize, action: usize, sum: f64 },
    #[error("initial distribution sums to {0}")]
    InitialSum(f64),
    #[error("successor {0} out of range")]
    Successor(usize),
    #[error("negative or non-finite probability {0}")]
    Probability(f64),
}

/// Finite MDP `p(o'|o,a)` with a labelling of every observation.
///
/// Successor lists are sparse; the gridworld is deterministic so each list
/// usually has one entry. Terminal observations mark game-over cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    vocab: Vocabulary,
    num_obs: usize,
    num_actions: usize,
    successors: Vec<Vec<(usize, f64)>>,
    initial: Vec<f64>,
    labels: Vec<LabelSet>,
    terminal: Vec<bool>,
}

impl TabularModel {
    /// `successors[o * num_actions + a]` lists `(o', p)` pairs.
    pub fn new(
        vocab: Vocabulary,
        num_actions: usize,
        successors: Vec<Vec<(usize, f64)>>,
        initial: Vec<f64>,
        labels: Vec<LabelSet>,
        terminal: Vec<bool>,
    ) -> Result<Self, ModelError> {
        let num_obs = labels.len();
        if num_obs == 0 || num_actions == 0 {
            return Err(ModelError::Empty);
        }
        let check = |what, expected, found| {
            if expected == found {
                Ok(())
            } else {
                Err(ModelError::Shape {
                    what,
                    expected,
                    found,
                })
            }
        };
        check("successor rows", num_obs * num_actions, successors.len())?;
        check("initial probabilities", num_obs, initial.len())?;
        check("terminal flags", num_obs, terminal.len())?;
        for (k, row) in successors.iter().enumerate() {
            let mut sum = 0.0;
            for &(next, p) in row {
                if next >= num_obs {
                    return Err(ModelError::Successor(next));
                }
                if !(p.is_finite() && p >= 0.0) {
                    return Err(ModelError::Probability(p));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(ModelError::RowSum {
                    obs: k / num_actions,
                    action: k % num_actions,
                    sum,
                });
            }
        }
        if let Some(&p) = initial.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(ModelError::Probability(p));
        }
        let s: f64 = initial.iter().sum();
        if (s - 1.0).abs() > ROW_TOL {
            return Err(ModelError::InitialSum(s));
        }
        Ok(TabularModel {
            vocab,
            num_obs,
            num_actions,
            successors,
            initial,
            labels,
            terminal,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn num_obs(&self) -> usize {
        self.num_obs
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn successors(&self, o: usize, a: usize) -> &[(usize, f64)] {
        &self.successors[o * self.num_actions + a]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn label(&self, o: usize) -> LabelSet {
        self.labels[o]
    }

    pub fn labels(&self) -> &[LabelSet] {
        &self.labels
    }

    pub fn is_terminal(&self, o: usize) -> bool {
        self.terminal[o]
    }

    /// Copy in which every terminal observation self-loops under all actions.
    /// Planners use this so that game-over cells are never left.
    pub fn with_absorbing_terminals(&self) -> TabularModel {
        let mut m = self.clone();
        for o in (0..self.num_obs).filter(|&o| self.terminal[o]) {
            for a in 0..self.num_actions {
                m.successors[o * self.num_actions + a] = vec![(o, 1.0)];
            }
        }
        m
    }

    /// Copy with one extra unlabelled observation (the last index) that every
    /// terminal observation leads to under all actions and that loops on
    /// itself. A game-over cell is then visited once, after which the agent
    /// sits in a reward-free sink; visitation mass is conserved.
    pub fn with_dead_end(&self) -> TabularModel {
        let n = self.num_obs;
        let dead = n;
        let mut successors = Vec::with_capacity((n + 1) * self.num_actions);
        for o in 0..n {
            for a in 0..self.num_actions {
                if self.terminal[o] {
                    successors.push(vec![(dead, 1.0)]);
                } else {
                    successors.push(self.successors[o * self.num_actions + a].clone());
                }
            }
        }
        for _ in 0..self.num_actions {
            successors.push(vec![(dead, 1.0)]);
        }
        let mut initial = self.initial.clone();
        initial.push(0.0);
        let mut labels = self.labels.clone();
        labels.push(LabelSet::EMPTY);
        let mut terminal = self.terminal.clone();
        terminal.push(true);
        TabularModel {
            vocab: self.vocab.clone(),
            num_obs: n + 1,
            num_actions: self.num_actions,
            successors,
            initial,
            labels,
            terminal,
        }
    }

    /// True if every successor list is a single entry.
    pub fn is_deterministic(&self) -> bool {
        self.successors.iter().all(|row| row.len() == 1)
    }
}
