use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{uniform_step, Successes};
use crate::error::{Error, Result};
use crate::lifting::LiftingMap;
use crate::markov::{Chain, ChainBuilder, Prob};

/// Largest `n` for the individual chain (3^10 − 1 = 59048 states).
pub const MAX_INDIVIDUAL_N: usize = 10;
/// Largest `n` for the system chain.
pub const MAX_SYSTEM_N: usize = 10_000;

/// What a process is about to do, as seen by the rest of the system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExtendedLocalState {
    /// About to read the decision register.
    Read,
    /// About to CAS with the current value; the CAS will succeed.
    Ccas,
    /// About to CAS with a stale value; the CAS will fail.
    OldCas,
}

impl ExtendedLocalState {
    fn digit(self) -> usize {
        match self {
            Self::Read => 0,
            Self::Ccas => 1,
            Self::OldCas => 2,
        }
    }

    fn from_digit(d: usize) -> Self {
        match d {
            0 => Self::Read,
            1 => Self::Ccas,
            _ => Self::OldCas,
        }
    }

    fn symbol(self) -> char {
        match self {
            Self::Read => 'R',
            Self::Ccas => 'C',
            Self::OldCas => 'O',
        }
    }
}

/// `(a, b)`: `a` processes in Read, `b` in OldCAS, the rest in CCAS.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScuSystemState {
    pub a: usize,
    pub b: usize,
}

impl ScuSystemState {
    pub fn label(self) -> String {
        format!("({},{})", self.a, self.b)
    }
}

fn check_individual(n: usize) -> Result<()> {
    if n == 0 || n > MAX_INDIVIDUAL_N {
        return Err(Error::OutOfRange(format!(
            "SCU individual chain needs 1 <= n <= {MAX_INDIVIDUAL_N}, got {n}"
        )));
    }
    Ok(())
}

/// Fine states are base-3 codes of the local-state vector, process 0 being the
/// least significant digit. All-OldCAS has the largest code, 3^n − 1, so the
/// valid codes are exactly `0..3^n − 1` and code equals state index.
pub fn decode_individual(n: usize, code: usize) -> Vec<ExtendedLocalState> {
    let mut digits = Vec::with_capacity(n);
    let mut rest = code;
    for _ in 0..n {
        digits.push(ExtendedLocalState::from_digit(rest % 3));
        rest /= 3;
    }
    digits
}

pub fn encode_individual(states: &[ExtendedLocalState]) -> usize {
    states.iter().rev().fold(0, |acc, s| acc * 3 + s.digit())
}

/// Successor of a fine state when `process` takes a step, and whether the
/// step is a successful CAS.
pub fn individual_step(states: &[ExtendedLocalState], process: usize) -> (Vec<ExtendedLocalState>, bool) {
    use ExtendedLocalState::*;
    let mut next = states.to_vec();
    match states[process] {
        Read => {
            next[process] = Ccas;
            (next, false)
        }
        OldCas => {
            next[process] = Read;
            (next, false)
        }
        Ccas => {
            for s in next.iter_mut().filter(|s| **s == Ccas) {
                *s = OldCas;
            }
            next[process] = Read;
            (next, true)
        }
    }
}

pub fn build_scu_individual(n: usize) -> Result<Chain> {
    build_scu_individual_with(n, Successes::All)
}

/// Individual chain over all `3^n − 1` local-state vectors. Each process
/// steps with probability 1/n; CCAS steps are success events, restricted to
/// one process when `successes` says so.
pub fn build_scu_individual_with(n: usize, successes: Successes) -> Result<Chain> {
    check_individual(n)?;
    successes.check(n)?;
    let count = 3usize.pow(n as u32) - 1;
    let labels = (0..count)
        .map(|code| decode_individual(n, code).iter().map(|s| s.symbol()).collect())
        .collect();
    let mut builder = ChainBuilder::new(labels);
    let step = uniform_step(n);
    for code in 0..count {
        let states = decode_individual(n, code);
        for p in 0..n {
            let (next, success) = individual_step(&states, p);
            let to = encode_individual(&next);
            if success && successes.counts(p) {
                builder.add_event(code, to, step);
            } else {
                builder.add(code, to, step);
            }
        }
    }
    builder.build()
}

/// Valid system states, sorted lexicographically by `(a, b)`.
pub fn scu_system_states(n: usize) -> Vec<ScuSystemState> {
    let mut states = Vec::new();
    for a in 0..=n {
        for b in 0..=(n - a) {
            if !(a == 0 && b == n) {
                states.push(ScuSystemState { a, b });
            }
        }
    }
    states
}

/// System chain over `(a, b)` counts, written directly from the aggregated
/// transition rule:
///
/// * a Read step, `(a−1, b)` with probability `a/n`;
/// * an OldCAS step, `(a+1, b−1)` with probability `b/n`;
/// * a CCAS step (success), `(a+1, n−a−1)` with probability `(n−a−b)/n`.
pub fn build_scu_system(n: usize) -> Result<Chain> {
    if n == 0 || n > MAX_SYSTEM_N {
        return Err(Error::OutOfRange(format!("SCU system chain needs 1 <= n <= {MAX_SYSTEM_N}, got {n}")));
    }
    let states = scu_system_states(n);
    let index: HashMap<ScuSystemState, usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut builder = ChainBuilder::new(states.iter().map(|s| s.label()).collect());
    let nn = n as i64;
    for (i, &ScuSystemState { a, b }) in states.iter().enumerate() {
        let c = n - a - b;
        if a > 0 {
            builder.add(i, index[&ScuSystemState { a: a - 1, b }], Prob::new(a as i64, nn));
        }
        if b > 0 {
            builder.add(i, index[&ScuSystemState { a: a + 1, b: b - 1 }], Prob::new(b as i64, nn));
        }
        if c > 0 {
            let to = index[&ScuSystemState { a: a + 1, b: n - a - 1 }];
            builder.add_event(i, to, Prob::new(c as i64, nn));
        }
    }
    builder.build()
}

/// Maps each local-state vector to `(#Read, #OldCAS)`.
pub fn scu_lifting_map(n: usize) -> Result<LiftingMap> {
    check_individual(n)?;
    let index: HashMap<ScuSystemState, usize> =
        scu_system_states(n).into_iter().enumerate().map(|(i, s)| (s, i)).collect();
    let count = 3usize.pow(n as u32) - 1;
    let fine_to_coarse = (0..count)
        .map(|code| index[&aggregate(&decode_individual(n, code))])
        .collect();
    LiftingMap::new(fine_to_coarse, index.len())
}

pub fn aggregate(states: &[ExtendedLocalState]) -> ScuSystemState {
    let a = states.iter().filter(|s| **s == ExtendedLocalState::Read).count();
    let b = states.iter().filter(|s| **s == ExtendedLocalState::OldCas).count();
    ScuSystemState { a, b }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use ExtendedLocalState::*;

    #[test]
    fn individual_sizes() {
        assert_eq!(build_scu_individual(1).unwrap().num_states(), 2);
        assert_eq!(build_scu_individual(2).unwrap().num_states(), 8);
        let c3 = build_scu_individual(3).unwrap();
        assert_eq!(c3.num_states(), 26);
        assert!(c3.validate().is_valid());
    }

    #[test]
    fn individual_cap() {
        assert!(build_scu_individual(0).is_err());
        assert!(build_scu_individual(11).is_err());
        assert!(build_scu_individual_with(2, Successes::Process(2)).is_err());
    }

    #[test]
    fn encoding_round_trips() {
        for code in 0..80 {
            assert_eq!(encode_individual(&decode_individual(4, code)), code);
        }
        assert_eq!(encode_individual(&[OldCas; 3]), 26);
    }

    #[test]
    fn ccas_step_invalidates_other_ccas() {
        let (next, success) = individual_step(&[Ccas, Ccas, Read], 1);
        assert!(success);
        assert_eq!(next, vec![OldCas, Read, Read]);
    }

    #[test]
    fn system_states_for_two() {
        let labels: Vec<String> = scu_system_states(2).iter().map(|s| s.label()).collect();
        assert_eq!(labels, ["(0,0)", "(0,1)", "(1,0)", "(1,1)", "(2,0)"]);
        assert_eq!(build_scu_system(2).unwrap().num_states(), 5);
    }

    #[test]
    fn system_transitions_from_one_one() {
        let c = build_scu_system(2).unwrap();
        let from = c.index_of("(1,1)").unwrap();
        assert_eq!(c.prob(from, c.index_of("(0,1)").unwrap()), Prob::new(1, 2));
        assert_eq!(c.prob(from, c.index_of("(2,0)").unwrap()), Prob::new(1, 2));
        assert_eq!(c.row(from).len(), 2);
    }

    #[test]
    fn all_read_moves_to_one_ccas() {
        for n in [1, 2, 5, 17] {
            let c = build_scu_system(n).unwrap();
            let from = c.index_of(&format!("({n},0)")).unwrap();
            let to = c.index_of(&format!("({},0)", n - 1)).unwrap();
            assert_eq!(c.row(from).len(), 1);
            assert_eq!(c.prob(from, to), Prob::new(1, 1));
            assert!(c.row(from)[0].event.is_zero());
        }
    }

    #[test]
    fn lifting_map_fibers() {
        let m2 = scu_lifting_map(2).unwrap();
        let sys = build_scu_system(2).unwrap();
        let read_read = encode_individual(&[Read, Read]);
        assert_eq!(sys.label(m2.coarse_of(read_read)), "(2,0)");
        assert_eq!(m2.fiber(sys.index_of("(1,1)").unwrap()).len(), 2);
        let m3 = scu_lifting_map(3).unwrap();
        assert_eq!(m3.fibers().iter().map(Vec::len).sum::<usize>(), 26);
    }
}
