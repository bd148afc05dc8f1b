//! The iterated balls-into-bins game.
//!
//! Bins start with one ball each. Every step throws a ball into a uniformly
//! random bin. When a bin reaches three balls, a reset ends the phase: that
//! bin goes back to one ball and every two-ball bin is emptied.
//!
//! Read as processes, one ball is Read, two balls is CCAS and zero balls is
//! OldCAS; a reset is a successful CAS. The game therefore walks the SCU(0,1)
//! system chain and a phase is the gap between two successes.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{event_rate, prob_to_f64, stationary};
use crate::models::scu;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRecord {
    /// Bins holding one ball when the phase started.
    pub a_start: usize,
    /// Empty bins when the phase started.
    pub b_start: usize,
    /// Throws until the reset, the resetting throw included.
    pub length: u64,
    pub range: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinsConfig {
    pub n: usize,
    pub phases: usize,
    pub seed: u64,
    pub alpha: f64,
    pub c: f64,
}

impl BinsConfig {
    pub fn new(n: usize, phases: usize, seed: u64) -> Self {
        Self { n, phases, seed, alpha: 4.0, c: 10.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::OutOfRange("bins game needs n >= 1".into()));
        }
        if !(self.alpha >= 4.0) {
            return Err(Error::OutOfRange(format!("alpha must be at least 4, got {}", self.alpha)));
        }
        if !(self.c >= 10.0) {
            return Err(Error::OutOfRange(format!("c must be at least 10, got {}", self.c)));
        }
        Ok(())
    }
}

/// 1: `a ∈ [n/3, n]`; 2: `n/c ≤ a < n/3`; 3: `a < n/c`.
pub fn range_of(a: usize, n: usize, c: f64) -> u8 {
    let a = a as f64;
    let n = n as f64;
    if 3.0 * a >= n {
        1
    } else if a * c >= n {
        2
    } else {
        3
    }
}

/// Bin contents with O(1) access to the class counts.
#[derive(Clone, Debug)]
pub struct BinsGame {
    balls: Vec<u8>,
    two_ball_bins: Vec<usize>,
    ones: usize,
    zeros: usize,
}

impl BinsGame {
    pub fn new(n: usize) -> Self {
        Self { balls: vec![1; n], two_ball_bins: Vec::new(), ones: n, zeros: 0 }
    }

    pub fn num_bins(&self) -> usize {
        self.balls.len()
    }

    /// `(bins with one ball, empty bins)`; the rest hold two balls.
    pub fn counts(&self) -> (usize, usize) {
        (self.ones, self.zeros)
    }

    pub fn balls(&self, bin: usize) -> u8 {
        self.balls[bin]
    }

    /// Throws a ball into `bin`; returns true if this caused a reset.
    pub fn throw(&mut self, bin: usize) -> bool {
        match self.balls[bin] {
            0 => {
                self.balls[bin] = 1;
                self.zeros -= 1;
                self.ones += 1;
                false
            }
            1 => {
                self.balls[bin] = 2;
                self.ones -= 1;
                self.two_ball_bins.push(bin);
                false
            }
            _ => {
                for b in self.two_ball_bins.drain(..) {
                    self.balls[b] = 0;
                    self.zeros += 1;
                }
                self.balls[bin] = 1;
                self.zeros -= 1;
                self.ones += 1;
                true
            }
        }
    }
}

pub fn run_bins(config: &BinsConfig) -> Result<Vec<PhaseRecord>> {
    config.validate()?;
    let n = config.n;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut game = BinsGame::new(n);
    let mut records = Vec::with_capacity(config.phases);
    let (mut a_start, mut b_start) = game.counts();
    let mut length = 0u64;
    while records.len() < config.phases {
        length += 1;
        if game.throw(rng.gen_range(0..n)) {
            records.push(PhaseRecord { a_start, b_start, length, range: range_of(a_start, n, config.c) });
            (a_start, b_start) = game.counts();
            length = 0;
        }
    }
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeStats {
    pub range: u8,
    pub phases: usize,
    pub fraction: f64,
    pub mean_length: f64,
    pub p50: u64,
    pub p90: u64,
    pub p99: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    pub n: usize,
    pub phases: usize,
    pub mean_length: f64,
    pub ranges: Vec<RangeStats>,
    /// Fraction of phases longer than the high-probability phase-length bound.
    pub bound_violation_fraction: f64,
    /// Longest run of consecutive range-3 phases.
    pub longest_range3_run: usize,
    /// `β = 2c² + 1`.
    pub beta: usize,
    pub range3_persisted: bool,
}

/// `2α·min(n√(ln n)/√a, n(ln n)^{1/3}/b^{1/3})`, dropping a term whose
/// denominator is zero. Infinite when both are zero.
pub fn phase_length_bound(n: usize, a: usize, b: usize, alpha: f64) -> f64 {
    let nf = n as f64;
    let ln = nf.ln();
    let mut bound = f64::INFINITY;
    if a > 0 {
        bound = bound.min(nf * ln.sqrt() / (a as f64).sqrt());
    }
    if b > 0 {
        bound = bound.min(nf * ln.cbrt() / (b as f64).cbrt());
    }
    2.0 * alpha * bound
}

fn percentile(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub fn phase_stats(records: &[PhaseRecord], n: usize, alpha: f64, c: f64) -> Result<RangeReport> {
    if records.is_empty() {
        return Err(Error::OutOfRange("phase_stats needs at least one phase".into()));
    }
    let mut by_range: BTreeMap<u8, Vec<u64>> = BTreeMap::from([(1, vec![]), (2, vec![]), (3, vec![])]);
    let mut violations = 0usize;
    let mut run = 0usize;
    let mut longest = 0usize;
    for r in records {
        let range = range_of(r.a_start, n, c);
        by_range.get_mut(&range).expect("ranges 1..=3").push(r.length);
        if r.length as f64 > phase_length_bound(n, r.a_start, r.b_start, alpha) {
            violations += 1;
        }
        run = if range == 3 { run + 1 } else { 0 };
        longest = longest.max(run);
    }
    let total = records.len();
    let ranges = by_range
        .into_iter()
        .map(|(range, mut lengths)| {
            lengths.sort_unstable();
            let phases = lengths.len();
            let mean_length = if phases == 0 { f64::NAN } else { lengths.iter().sum::<u64>() as f64 / phases as f64 };
            RangeStats {
                range,
                phases,
                fraction: phases as f64 / total as f64,
                mean_length,
                p50: percentile(&lengths, 0.5),
                p90: percentile(&lengths, 0.9),
                p99: percentile(&lengths, 0.99),
            }
        })
        .collect();
    let beta = (2.0 * c * c).floor() as usize + 1;
    Ok(RangeReport {
        n,
        phases: total,
        mean_length: records.iter().map(|r| r.length).sum::<u64>() as f64 / total as f64,
        ranges,
        bound_violation_fraction: violations as f64 / total as f64,
        longest_range3_run: longest,
        beta,
        range3_persisted: longest >= beta,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub n: usize,
    pub phases: usize,
    pub empirical_mean_length: f64,
    pub exact_latency: f64,
    pub relative_error: f64,
    /// Largest gap between the empirical and exact distributions of phase-start states.
    pub max_start_deviation: f64,
    /// Phase starts that are not post-success states of the chain.
    pub foreign_starts: usize,
}

/// Runs the game and compares it with the exact SCU(0,1) system chain: the
/// mean phase length against the chain's latency, and the phase-start states
/// against the stationary law of the state right after a success.
pub fn bins_vs_chain(n: usize, phases: usize, seed: u64) -> Result<EquivalenceReport> {
    if phases < 2 {
        return Err(Error::OutOfRange("bins_vs_chain needs at least two phases".into()));
    }
    let chain = scu::build_scu_system(n)?;
    let pi = stationary(&chain, 1e-13)?;
    let rate = event_rate(&chain, &pi)?;
    // Law of the state entered by a success: success flow into y over μ.
    let mut after_success = vec![0.0; chain.num_states()];
    for (i, row) in chain.rows() {
        for t in row {
            after_success[t.to] += pi.get(i) * prob_to_f64(&t.event);
        }
    }
    after_success.iter_mut().for_each(|v| *v /= rate.mu);

    let records = run_bins(&BinsConfig::new(n, phases, seed))?;
    let mut counts = vec![0usize; chain.num_states()];
    let mut foreign_starts = 0;
    let index: BTreeMap<scu::ScuSystemState, usize> =
        scu::scu_system_states(n).into_iter().enumerate().map(|(i, s)| (s, i)).collect();
    // The very first phase starts from the initial state, not from a reset.
    for r in &records[1..] {
        let i = index[&scu::ScuSystemState { a: r.a_start, b: r.b_start }];
        if after_success[i] == 0.0 {
            foreign_starts += 1;
        }
        counts[i] += 1;
    }
    let m = (records.len() - 1).max(1) as f64;
    let max_start_deviation = counts
        .iter()
        .zip(&after_success)
        .map(|(&c, &p)| (c as f64 / m - p).abs())
        .fold(0.0, f64::max);
    let empirical = records.iter().map(|r| r.length).sum::<u64>() as f64 / records.len() as f64;
    Ok(EquivalenceReport {
        n,
        phases,
        empirical_mean_length: empirical,
        exact_latency: rate.latency,
        relative_error: (empirical - rate.latency).abs() / rate.latency,
        max_start_deviation,
        foreign_starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bin_phases_have_length_two() {
        let records = run_bins(&BinsConfig::new(1, 50, 3)).unwrap();
        assert!(records.iter().all(|r| r.length == 2 && r.a_start == 1 && r.b_start == 0));
    }

    #[test]
    fn reset_rule() {
        let mut g = BinsGame::new(4);
        g.throw(0);
        g.throw(1);
        assert_eq!(g.counts(), (2, 0));
        assert!(g.throw(1));
        assert_eq!((g.balls(0), g.balls(1)), (0, 1));
        assert_eq!(g.counts(), (3, 1));
    }

    #[test]
    fn starts_partition_the_bins() {
        for r in run_bins(&BinsConfig::new(37, 2000, 1)).unwrap() {
            assert_eq!(r.a_start + r.b_start, 37);
            assert!(r.length >= 1);
        }
    }

    #[test]
    fn config_constants() {
        let mut cfg = BinsConfig::new(4, 1, 0);
        cfg.alpha = 3.0;
        assert!(run_bins(&cfg).is_err());
        cfg.alpha = 4.0;
        cfg.c = 9.0;
        assert!(run_bins(&cfg).is_err());
    }

    #[test]
    fn all_full_starts_are_range_one() {
        let records: Vec<PhaseRecord> =
            (0..10).map(|_| PhaseRecord { a_start: 8, b_start: 0, length: 3, range: 1 }).collect();
        let report = phase_stats(&records, 8, 4.0, 10.0).unwrap();
        assert_eq!(report.ranges[0].fraction, 1.0);
        assert_eq!(report.ranges[2].phases, 0);
        assert_eq!(report.beta, 201);
    }

    #[test]
    fn ranges() {
        assert_eq!(range_of(100, 300, 10.0), 1);
        assert_eq!(range_of(99, 300, 10.0), 2);
        assert_eq!(range_of(30, 300, 10.0), 2);
        assert_eq!(range_of(29, 300, 10.0), 3);
    }
}
