use crate::model::TabularModel;

use super::RewardMachine;

/// Markov model over `(u, o)` obtained by running a reward machine alongside a
/// base model. Flat index is `u * num_obs + o`.
///
/// A transition `(o, u) --a--> (o', u')` has the base probability `p(o'|o,a)`
/// with `u' = step(u, L(o'))`; every other target has probability zero.
#[derive(Debug, Clone)]
pub struct ProductModel {
    num_rm_states: usize,
    num_obs: usize,
    num_actions: usize,
    successors: Vec<Vec<(usize, f64)>>,
    goal: Vec<Vec<bool>>,
    initial: Vec<f64>,
}

impl ProductModel {
    pub fn build(base: &TabularModel, rm: &RewardMachine) -> ProductModel {
        let n_u = rm.num_states();
        let n_o = base.num_obs();
        let n_a = base.num_actions();
        let mut successors = Vec::with_capacity(n_u * n_o * n_a);
        let mut goal = Vec::with_capacity(n_u * n_o * n_a);
        for u in 0..n_u {
            for o in 0..n_o {
                for a in 0..n_a {
                    let mut row = Vec::with_capacity(1);
                    let mut g = Vec::with_capacity(1);
                    for &(o2, p) in base.successors(o, a) {
                        let s = rm.transition(u, base.label(o2)).expect("state in range");
                        row.push((s.next * n_o + o2, p));
                        g.push(s.goal);
                    }
                    successors.push(row);
                    goal.push(g);
                }
            }
        }
        let mut initial = vec![0.0; n_u * n_o];
        let u0 = rm.initial_state();
        for (o, &p) in base.initial().iter().enumerate() {
            initial[u0 * n_o + o] = p;
        }
        ProductModel {
            num_rm_states: n_u,
            num_obs: n_o,
            num_actions: n_a,
            successors,
            goal,
            initial,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_rm_states * self.num_obs
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

    pub fn index(&self, u: usize, o: usize) -> usize {
        u * self.num_obs + o
    }

    /// Inverse of [`ProductModel::index`]: `(u, o)`.
    pub fn split(&self, x: usize) -> (usize, usize) {
        (x / self.num_obs, x % self.num_obs)
    }

    pub fn successors(&self, x: usize, a: usize) -> &[(usize, f64)] {
        &self.successors[x * self.num_actions + a]
    }

    /// Goal flags parallel to [`ProductModel::successors`]: whether the machine
    /// entered a terminal state on that transition.
    pub fn goal_flags(&self, x: usize, a: usize) -> &[bool] {
        &self.goal[x * self.num_actions + a]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Dense row of `p(. | x, a)`.
    pub fn dense_row(&self, x: usize, a: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.num_states()];
        for &(y, p) in self.successors(x, a) {
            row[y] += p;
        }
        row
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rm::{LabelSet, Vocabulary};

    fn line_model() -> TabularModel {
        // 0 - 1 - 2 ; action 0 left, action 1 right; 2 is labelled c
        let v = Vocabulary::office();
        let c = v.label_set(&["c"]).unwrap();
        let mut succ = Vec::new();
        for o in 0..3usize {
            succ.push(vec![(o.saturating_sub(1), 1.0)]);
            succ.push(vec![((o + 1).min(2), 1.0)]);
        }
        TabularModel::new(
            v,
            2,
            succ,
            vec![1.0, 0.0, 0.0],
            vec![LabelSet::EMPTY, LabelSet::EMPTY, c],
            vec![false; 3],
        )
        .unwrap()
    }

    #[test]
    fn one_state_product_matches_base() {
        let base = line_model();
        let rm = RewardMachine::trivial(base.vocab().clone());
        let p = ProductModel::build(&base, &rm);
        assert_eq!(p.num_states(), 3);
        for o in 0..3 {
            for a in 0..2 {
                assert_eq!(p.successors(o, a), base.successors(o, a));
            }
        }
        assert_eq!(p.initial(), base.initial());
    }

    #[test]
    fn product_tracks_machine() {
        let base = line_model();
        let v = base.vocab().clone();
        let rm = RewardMachine::new(v.clone(), 3)
            .unwrap()
            .with_transition(0, v.label_set(&["c"]).unwrap(), 1)
            .unwrap();
        let p = ProductModel::build(&base, &rm);
        assert_eq!(p.num_states(), 9);
        // (u0, o1) --right--> (u1, o2)
        assert_eq!(p.successors(p.index(0, 1), 1), &[(p.index(1, 2), 1.0)]);
        assert_eq!(p.split(p.index(1, 2)), (1, 2));
        for x in 0..p.num_states() {
            for a in 0..2 {
                let s: f64 = p.dense_row(x, a).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }
}
