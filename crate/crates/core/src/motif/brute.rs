use rayon::prelude::*;

use super::cost::{Structure, Traces};
use super::MotifError;

/// Largest number of candidate tables the exhaustive search will visit.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

/// Largest state budget accepted by [`brute_force_rm`].
pub const BRUTE_FORCE_MAX_STATES: usize = 3;

/// Number of tables with exactly `n` states over `free` searchable labels.
fn tables(n: usize, free: usize) -> Option<u128> {
    (n as u128).checked_pow(u32::try_from(n * free).ok()?)
}

/// Exhaustive minimum of the structure cost over all tables with
/// `1..=u_max` states. Labels the traces pin to self-loops stay pinned. Ties
/// prefer fewer states, then the lexicographically smallest table. The
/// result is in canonical form.
pub fn brute_force_rm(traces: &Traces, u_max: usize) -> Result<(Structure, f64), MotifError> {
    if u_max == 0 || u_max > BRUTE_FORCE_MAX_STATES {
        return Err(MotifError::Config(format!(
            "exhaustive search supports 1..={BRUTE_FORCE_MAX_STATES} states"
        )));
    }
    if traces.is_empty() {
        return Err(MotifError::EmptyDemos);
    }
    let labels = traces.num_labels();
    let free = traces.free_labels();
    let mut total: u128 = 0;
    for n in 1..=u_max {
        total = tables(n, free.len())
            .and_then(|t| total.checked_add(t))
            .unwrap_or(u128::MAX);
    }
    if total > BRUTE_FORCE_LIMIT {
        return Err(MotifError::SearchSpace {
            candidates: total,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut best: Option<(f64, usize, u128)> = None;
    for n in 1..=u_max {
        let count = tables(n, free.len()).expect("bounded above");
        let found = (0..count as u64)
            .into_par_iter()
            .map(|idx| {
                let s = decode(n, labels, free, idx);
                (s.cost(traces), idx)
            })
            .reduce_with(|a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
        if let Some((c, idx)) = found {
            if best.is_none_or(|(bc, _, _)| c < bc) {
                best = Some((c, n, idx as u128));
            }
        }
    }
    let (c, n, idx) = best.expect("at least one table");
    Ok((decode(n, labels, free, idx as u64).canonical(), c))
}

/// Table number `idx`: free slots read as base-`n` digits, most significant
/// first; pinned slots are self-loops.
fn decode(n: usize, labels: usize, free: &[usize], mut idx: u64) -> Structure {
    let mut delta: Vec<u8> = (0..n * labels).map(|k| (k / labels) as u8).collect();
    for u in (0..n).rev() {
        for &l in free.iter().rev() {
            delta[u * labels + l] = (idx % n as u64) as u8;
            idx /= n as u64;
        }
    }
    Structure::from_table(n, labels, delta)
}
