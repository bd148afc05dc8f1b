use std::collections::HashMap;

use super::{uniform_step, Successes};
use crate::error::{Error, Result};
use crate::lifting::LiftingMap;
use crate::markov::{Chain, ChainBuilder, Prob};

pub const MAX_INDIVIDUAL_STATES: usize = 1_000_000;
pub const MAX_SYSTEM_STATES: usize = 100_000;

fn individual_size(n: usize, q: usize) -> Result<usize> {
    if n == 0 || q == 0 {
        return Err(Error::OutOfRange(format!("parallel chain needs n >= 1 and q >= 1, got n={n}, q={q}")));
    }
    (q as u64)
        .checked_pow(n as u32)
        .filter(|&s| s <= MAX_INDIVIDUAL_STATES as u64)
        .map(|s| s as usize)
        .ok_or_else(|| Error::OutOfRange(format!("parallel individual chain limited to q^n <= {MAX_INDIVIDUAL_STATES}")))
}

/// Counter vector of a base-`q` code, process 0 least significant.
pub fn decode_counters(n: usize, q: usize, code: usize) -> Vec<usize> {
    let mut rest = code;
    (0..n)
        .map(|_| {
            let d = rest % q;
            rest /= q;
            d
        })
        .collect()
}

pub fn build_parallel_individual(n: usize, q: usize) -> Result<Chain> {
    build_parallel_individual_with(n, q, Successes::All)
}

/// `q^n` counter vectors; a step increments the scheduled process's counter
/// mod `q`, and a wrap to 0 is that process's success.
pub fn build_parallel_individual_with(n: usize, q: usize, successes: Successes) -> Result<Chain> {
    let count = individual_size(n, q)?;
    successes.check(n)?;
    let labels = (0..count)
        .map(|code| {
            let c: Vec<String> = decode_counters(n, q, code).iter().map(ToString::to_string).collect();
            format!("[{}]", c.join(","))
        })
        .collect();
    let mut builder = ChainBuilder::new(labels);
    let step = uniform_step(n);
    let mut place = 1usize;
    let places: Vec<usize> = (0..n)
        .map(|_| {
            let p = place;
            place *= q;
            p
        })
        .collect();
    for code in 0..count {
        let counters = decode_counters(n, q, code);
        for p in 0..n {
            let (to, wraps) = if counters[p] + 1 == q {
                (code - counters[p] * places[p], true)
            } else {
                (code + places[p], false)
            };
            if wraps && successes.counts(p) {
                builder.add_event(code, to, step);
            } else {
                builder.add(code, to, step);
            }
        }
    }
    builder.build()
}

/// Occupancy vectors `(v_0..v_{q−1})` with `Σ v_j = n`, lexicographic order.
pub fn occupancy_states(n: usize, q: usize) -> Vec<Vec<usize>> {
    fn fill(prefix: &mut Vec<usize>, remaining: usize, slots: usize, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=remaining {
            prefix.push(v);
            fill(prefix, remaining - v, slots - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    fill(&mut Vec::with_capacity(q), n, q, &mut out);
    out
}

fn system_size(n: usize, q: usize) -> Result<u64> {
    if n == 0 || q == 0 {
        return Err(Error::OutOfRange(format!("parallel chain needs n >= 1 and q >= 1, got n={n}, q={q}")));
    }
    let c = occupancy_states_count(n, q);
    if c > MAX_SYSTEM_STATES as u64 {
        return Err(Error::OutOfRange(format!("parallel system chain limited to {MAX_SYSTEM_STATES} states")));
    }
    Ok(c)
}

/// `C(n + q − 1, q − 1)`, saturating at `u64::MAX`.
pub fn occupancy_states_count(n: usize, q: usize) -> u64 {
    let mut c: u128 = 1;
    for k in 1..q as u128 {
        c = c * (n as u128 + k) / k;
        if c > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    c as u64
}

/// From `(v_0..v_{q−1})`, for every `i` with `v_i > 0` move one process from
/// counter `i` to `(i+1) mod q` with probability `v_i/n`; moving out of
/// `q−1` is a success.
pub fn build_parallel_system(n: usize, q: usize) -> Result<Chain> {
    system_size(n, q)?;
    let states = occupancy_states(n, q);
    let index: HashMap<&[usize], usize> = states.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
    let labels = states
        .iter()
        .map(|v| format!("({})", v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")))
        .collect();
    let mut builder = ChainBuilder::new(labels);
    for (i, v) in states.iter().enumerate() {
        for j in (0..q).filter(|&j| v[j] > 0) {
            let mut next = v.clone();
            next[j] -= 1;
            next[(j + 1) % q] += 1;
            let prob = Prob::new(v[j] as i64, n as i64);
            let to = index[next.as_slice()];
            if j + 1 == q {
                builder.add_event(i, to, prob);
            } else {
                builder.add(i, to, prob);
            }
        }
    }
    builder.build()
}

/// Counter vector ↦ occupancy vector.
pub fn parallel_lifting_map(n: usize, q: usize) -> Result<LiftingMap> {
    let count = individual_size(n, q)?;
    let states = occupancy_states(n, q);
    let index: HashMap<Vec<usize>, usize> = states.into_iter().enumerate().map(|(i, s)| (s, i)).collect();
    let fine_to_coarse = (0..count)
        .map(|code| {
            let mut occ = vec![0usize; q];
            for c in decode_counters(n, q, code) {
                occ[c] += 1;
            }
            index[&occ]
        })
        .collect();
    LiftingMap::new(fine_to_coarse, index.len())
}
