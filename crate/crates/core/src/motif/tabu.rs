use std::collections::VecDeque;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Rng};

use super::cost::{Structure, Traces};
use super::MotifError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub u_max: usize,
    /// Number of recent solutions that may not be revisited.
    pub tenure: usize,
    /// Moves evaluated per iteration when the full neighbourhood is larger.
    pub neighborhood: usize,
    pub max_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Pin transitions on the empty label set to self-loops.
    pub empty_self_loop: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            u_max: 4,
            tenure: 7,
            neighborhood: 256,
            max_iterations: 200,
            restarts: 10,
            seed: 0,
            empty_self_loop: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), MotifError> {
        if self.u_max == 0 || self.u_max > 64 {
            return Err(MotifError::Config("u_max must be between 1 and 64".into()));
        }
        if self.max_iterations == 0 || self.restarts == 0 || self.neighborhood == 0 {
            return Err(MotifError::Config(
                "iterations, restarts and neighborhood must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub restart: usize,
    pub iteration: usize,
    /// Best cost found so far in this restart.
    pub incumbent_cost: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub structure: Structure,
    pub cost: f64,
    pub restart: usize,
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Clone, Copy)]
enum Move {
    Redirect { u: usize, l: usize, to: usize },
    AddState { u: usize, l: usize },
    /// Redirect `(u, l)` to a new copy of its current target.
    Split { u: usize, l: usize },
    Merge { keep: usize, drop: usize },
}

fn count_moves(s: &Structure, free: &[usize], u_max: usize) -> usize {
    let n = s.n;
    let f = free.len();
    let redirect = n * f * (n - 1);
    let add = if n < u_max { 2 * n * f } else { 0 };
    redirect + add + n * (n - 1) / 2
}

fn nth_move(s: &Structure, free: &[usize], u_max: usize, mut i: usize) -> Move {
    let n = s.n;
    let f = free.len();
    let redirect = n * f * (n - 1);
    if i < redirect {
        let (key, k) = (i / (n - 1), i % (n - 1));
        let (u, l) = (key / f, free[key % f]);
        let cur = s.target(u, l);
        // skip the current target
        let to = if k >= cur { k + 1 } else { k };
        return Move::Redirect { u, l, to };
    }
    i -= redirect;
    if n < u_max {
        let add = n * f;
        if i < add {
            return Move::AddState {
                u: i / f,
                l: free[i % f],
            };
        }
        i -= add;
        if i < add {
            return Move::Split {
                u: i / f,
                l: free[i % f],
            };
        }
        i -= add;
    }
    // i-th pair keep < drop
    let mut keep = 0;
    let mut left = i;
    while left >= n - 1 - keep {
        left -= n - 1 - keep;
        keep += 1;
    }
    Move::Merge {
        keep,
        drop: keep + 1 + left,
    }
}

fn apply(s: &Structure, m: Move) -> Structure {
    let l = s.labels;
    let mut out = s.clone();
    match m {
        Move::Redirect { u, l: li, to } => out.delta[u * l + li] = to as u8,
        Move::AddState { u, l: li } => {
            let new = s.n;
            out.delta.extend((0..l).map(|_| new as u8));
            out.n += 1;
            out.delta[u * l + li] = new as u8;
        }
        Move::Split { u, l: li } => {
            // the copy keeps the target's row, with its self-loops on itself
            let new = s.n;
            let t = s.target(u, li);
            out.delta
                .extend((0..l).map(|x| if s.target(t, x) == t { new as u8 } else { s.delta[t * l + x] }));
            out.n += 1;
            out.delta[u * l + li] = new as u8;
        }
        Move::Merge { keep, drop } => {
            for d in out.delta.iter_mut() {
                if *d as usize == drop {
                    *d = keep as u8;
                }
            }
            let last = s.n - 1;
            if drop != last {
                // move the last state into the freed slot
                for li in 0..l {
                    out.delta[drop * l + li] = out.delta[last * l + li];
                }
                for d in out.delta.iter_mut() {
                    if *d as usize == last {
                        *d = drop as u8;
                    }
                }
            }
            out.delta.truncate(last * l);
            out.n -= 1;
        }
    }
    out.canonical()
}

fn random_structure(traces: &Traces, u_max: usize, rng: &mut Rng) -> Structure {
    let labels = traces.num_labels();
    let n = rng.random_range(1..=u_max);
    let delta = (0..n * labels)
        .map(|k| {
            if traces.is_free(k % labels) {
                rng.random_range(0..n) as u8
            } else {
                (k / labels) as u8
            }
        })
        .collect();
    Structure::from_table(n, labels, delta).canonical()
}

fn better(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

fn run_restart(traces: &Traces, cfg: &SearchConfig, restart: usize) -> SearchOutcome {
    let mut rng = stream(cfg.seed, "search-restart", restart as u64);
    let labels = traces.num_labels();
    let mut current = if restart == 0 {
        Structure::trivial(labels)
    } else {
        random_structure(traces, cfg.u_max, &mut rng)
    };
    let mut current_cost = current.cost(traces);
    let mut best = current.clone();
    let mut best_cost = current_cost;
    let mut tabu: VecDeque<Structure> = VecDeque::with_capacity(cfg.tenure + 1);
    tabu.push_back(current.clone());
    let mut log = Vec::with_capacity(cfg.max_iterations + 1);
    log.push(LogEntry {
        restart,
        iteration: 0,
        incumbent_cost: best_cost,
    });
    for iteration in 1..=cfg.max_iterations {
        if best_cost == 0.0 && best.n == 1 {
            break;
        }
        let free = traces.free_labels();
        let total = count_moves(&current, free, cfg.u_max);
        if total == 0 {
            break;
        }
        let indices: Vec<usize> = if total <= cfg.neighborhood {
            (0..total).collect()
        } else {
            (0..cfg.neighborhood)
                .map(|_| rng.random_range(0..total))
                .collect()
        };
        let mut chosen: Option<(Structure, f64)> = None;
        for i in indices {
            let cand = apply(&current, nth_move(&current, free, cfg.u_max, i));
            let c = cand.cost(traces);
            let aspiration = better((c, cand.n), (best_cost, best.n));
            if tabu.contains(&cand) && !aspiration {
                continue;
            }
            let take = match &chosen {
                None => true,
                Some((s, cc)) => better((c, cand.n), (*cc, s.n)),
            };
            if take {
                chosen = Some((cand, c));
            }
        }
        let Some((next, c)) = chosen else {
            // every sampled move was tabu
            log.push(LogEntry {
                restart,
                iteration,
                incumbent_cost: best_cost,
            });
            continue;
        };
        current = next;
        current_cost = c;
        tabu.push_back(current.clone());
        if tabu.len() > cfg.tenure {
            tabu.pop_front();
        }
        if better((current_cost, current.n), (best_cost, best.n)) {
            best = current.clone();
            best_cost = current_cost;
        }
        log.push(LogEntry {
            restart,
            iteration,
            incumbent_cost: best_cost,
        });
    }
    SearchOutcome {
        structure: best,
        cost: best_cost,
        restart,
        log,
    }
}

/// Tabu search over transition tables with at most `u_max` states. Restart 0
/// starts from the one-state machine, the others from random tables. The
/// best structure over all restarts is returned (ties: fewer states, then
/// lower restart index) together with the concatenated search log.
///
/// `cfg.empty_self_loop` has no effect here: pinned labels are a property of
/// the [`Traces`] (see [`Traces::with_options`]).
pub fn tabu_search(traces: &Traces, cfg: &SearchConfig) -> Result<SearchOutcome, MotifError> {
    cfg.validate()?;
    if traces.is_empty() {
        return Err(MotifError::EmptyDemos);
    }
    let runs: Vec<SearchOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(traces, cfg, r))
        .collect();
    let mut log = Vec::new();
    let mut best: Option<SearchOutcome> = None;
    for run in runs {
        log.extend_from_slice(&run.log);
        let replace = match &best {
            None => true,
            Some(b) => better((run.cost, run.structure.n), (b.cost, b.structure.n)),
        };
        if replace {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");
    best.log = log;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: usize, labels: usize, delta: &[u8]) -> Structure {
        Structure::from_table(n, labels, delta.to_vec())
    }

    #[test]
    fn move_enumeration_is_exhaustive() {
        let st = s(3, 2, &[1, 2, 0, 2, 1, 0]);
        let free = [0, 1];
        let total = count_moves(&st, &free, 4);
        // redirects 3*2*2, adds 3*2, splits 3*2, merges 3
        assert_eq!(total, 12 + 6 + 6 + 3);
        let mut merges = Vec::new();
        for i in 0..total {
            if let Move::Merge { keep, drop } = nth_move(&st, &free, 4, i) {
                merges.push((keep, drop));
            }
            if let Move::Redirect { u, l, to } = nth_move(&st, &free, 4, i) {
                assert_ne!(st.target(u, l), to);
            }
        }
        assert_eq!(merges, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn merge_and_add_keep_tables_valid() {
        let st = s(3, 2, &[1, 2, 0, 2, 1, 0]);
        let merged = apply(&st, Move::Merge { keep: 0, drop: 1 });
        assert_eq!(merged.n, 2);
        let grown = apply(&st, Move::AddState { u: 0, l: 0 });
        assert_eq!(grown.n, 4);
        assert_eq!(grown.target(0, 0), grown.target(0, 0));
        assert!(grown.delta.iter().all(|&d| (d as usize) < 4));
    }

    #[test]
    fn split_copies_target_row() {
        // u0 -0,1-> u1; u1 loops on 0 and returns on 1
        let st = s(2, 2, &[1, 1, 1, 0]);
        let split = apply(&st, Move::Split { u: 0, l: 0 });
        assert_eq!(split.n, 3);
        let (copy, orig) = (split.target(0, 0), split.target(0, 1));
        assert_ne!(copy, orig);
        for u in [copy, orig] {
            assert_eq!(split.target(u, 0), u);
            assert_eq!(split.target(u, 1), 0);
        }
    }

    #[test]
    fn split_never_raises_cost() {
        use crate::expert::{Dataset, Trajectory};
        use crate::rm::Vocabulary;
        let v = Vocabulary::new(&["a", "b", "c"]).unwrap();
        let mut rng = stream(7, "split-test", 0);
        let trajectories = (0..6)
            .map(|_| {
                let len = rng.random_range(3..20);
                let labels: Vec<_> = (0..len)
                    .map(|_| crate::rm::LabelSet::singleton(rng.random_range(0..3)))
                    .collect();
                Trajectory {
                    obs: vec![0; len],
                    acts: vec![0; len - 1],
                    labels,
                }
            })
            .collect();
        let traces = Traces::new(&Dataset::new(v, trajectories)).unwrap();
        for restart in 0..20 {
            let mut r = stream(7, "split-start", restart);
            let st = random_structure(&traces, 3, &mut r);
            let free = traces.free_labels();
            for u in 0..st.n {
                for &l in free {
                    let c = apply(&st, Move::Split { u, l }).cost(&traces);
                    assert!(c <= st.cost(&traces) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn canonical_form_is_permutation_invariant() {
        // same machine with states 1 and 2 swapped
        let a = s(3, 2, &[1, 0, 2, 0, 2, 2]);
        let b = s(3, 2, &[2, 0, 1, 1, 1, 0]);
        assert_eq!(a.canonical(), b.canonical());
        // unreachable state dropped
        let c = s(2, 1, &[0, 1]);
        assert_eq!(c.canonical().n, 1);
    }
}
