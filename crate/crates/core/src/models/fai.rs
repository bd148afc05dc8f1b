use super::{uniform_step, Successes};
use crate::error::{Error, Result};
use crate::lifting::LiftingMap;
use crate::markov::{Chain, ChainBuilder, Prob};

pub const MAX_INDIVIDUAL_N: usize = 20;
pub const MAX_GLOBAL_N: usize = 1_000_000;

/// Label for a set of processes holding the current value, 1-based.
fn subset_label(mask: usize, n: usize) -> String {
    let members: Vec<String> = (0..n).filter(|p| mask >> p & 1 == 1).map(|p| (p + 1).to_string()).collect();
    format!("{{{}}}", members.join(","))
}

pub fn build_fai_individual(n: usize) -> Result<Chain> {
    build_fai_individual_with(n, Successes::All)
}

/// States are the non-empty subsets `S` of processes holding the current
/// value, indexed by `bitmask − 1`. A scheduled `p ∈ S` wins (next state
/// `{p}`); a scheduled `p ∉ S` picks up the current value (`S ∪ {p}`).
pub fn build_fai_individual_with(n: usize, successes: Successes) -> Result<Chain> {
    if n == 0 || n > MAX_INDIVIDUAL_N {
        return Err(Error::OutOfRange(format!("FAI individual chain needs 1 <= n <= {MAX_INDIVIDUAL_N}, got {n}")));
    }
    successes.check(n)?;
    let count = (1usize << n) - 1;
    let mut builder = ChainBuilder::new((1..=count).map(|mask| subset_label(mask, n)).collect());
    let step = uniform_step(n);
    for mask in 1..=count {
        for p in 0..n {
            let bit = 1usize << p;
            if mask & bit != 0 {
                if successes.counts(p) {
                    builder.add_event(mask - 1, bit - 1, step);
                } else {
                    builder.add(mask - 1, bit - 1, step);
                }
            } else {
                builder.add(mask - 1, (mask | bit) - 1, step);
            }
        }
    }
    builder.build()
}

/// States `v_1..v_n` (index `i − 1`). Every edge into `v_1` is a success.
pub fn build_fai_global(n: usize) -> Result<Chain> {
    if n == 0 || n > MAX_GLOBAL_N {
        return Err(Error::OutOfRange(format!("FAI global chain needs 1 <= n <= {MAX_GLOBAL_N}, got {n}")));
    }
    let nn = n as i64;
    let mut builder = ChainBuilder::new((1..=n).map(|i| format!("v{i}")).collect());
    for i in 1..=n {
        builder.add_event(i - 1, 0, Prob::new(i as i64, nn));
        if i < n {
            builder.add(i - 1, i, Prob::new(nn - i as i64, nn));
        }
    }
    builder.build()
}

/// `S ↦ v_{|S|}`.
pub fn fai_lifting_map(n: usize) -> Result<LiftingMap> {
    if n == 0 || n > MAX_INDIVIDUAL_N {
        return Err(Error::OutOfRange(format!("FAI lifting map needs 1 <= n <= {MAX_INDIVIDUAL_N}, got {n}")));
    }
    let fine_to_coarse = (1..(1usize << n)).map(|mask| mask.count_ones() as usize - 1).collect();
    LiftingMap::new(fine_to_coarse, n)
}

/// `Z[0] = 1`, `Z[i] = (i/n)·Z[i−1] + 1`: the expected steps for the global
/// chain to reach `v_1` from `v_{n−i}`. `Z[n−1]` is the system latency.
pub fn fai_hitting_recurrence(n: usize) -> Vec<f64> {
    let mut z = Vec::with_capacity(n);
    let mut prev = 1.0;
    z.push(prev);
    for i in 1..n {
        prev = i as f64 / n as f64 * prev + 1.0;
        z.push(prev);
    }
    z.truncate(n.max(1));
    z
}
