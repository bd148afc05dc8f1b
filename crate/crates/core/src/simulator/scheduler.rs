use std::collections::BTreeMap;

use rand::distributions::Distribution as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::WeightedAliasIndex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerKind {
    Uniform,
    Weighted,
    UniformWithCrashes,
}

/// Per-step scheduling distribution over the active processes.
///
/// `theta` is the weak-fairness floor: every active process must be scheduled
/// with probability at least `theta`. Uniform schedulers default it to `1/n`.
/// A process listed in `crash_times` leaves the active set at that step index
/// and never returns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulerSpec {
    pub kind: SchedulerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub crash_times: BTreeMap<usize, u64>,
}

impl SchedulerSpec {
    pub fn uniform() -> Self {
        Self { kind: SchedulerKind::Uniform, weights: None, theta: None, crash_times: BTreeMap::new() }
    }

    pub fn weighted(weights: Vec<f64>, theta: f64) -> Self {
        Self { kind: SchedulerKind::Weighted, weights: Some(weights), theta: Some(theta), crash_times: BTreeMap::new() }
    }

    pub fn uniform_with_crashes(crash_times: BTreeMap<usize, u64>) -> Self {
        Self { kind: SchedulerKind::UniformWithCrashes, weights: None, theta: None, crash_times }
    }

    /// Crashes processes `k..n` at step 0, leaving `k` correct processes.
    pub fn with_correct(n: usize, k: usize) -> Self {
        if k >= n {
            return Self::uniform();
        }
        Self::uniform_with_crashes((k..n).map(|p| (p, 0)).collect())
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Scheduler("need at least one process".into()));
        }
        if let Some(theta) = self.theta {
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(Error::Scheduler(format!("theta must lie in (0, 1], got {theta}")));
            }
        }
        if let Some((&p, _)) = self.crash_times.iter().find(|(&p, _)| p >= n) {
            return Err(Error::Scheduler(format!("crash time given for process {p}, but n = {n}")));
        }
        match self.kind {
            SchedulerKind::Uniform | SchedulerKind::UniformWithCrashes => {
                if self.weights.is_some() {
                    return Err(Error::Scheduler("uniform scheduler takes no weights".into()));
                }
                if self.kind == SchedulerKind::Uniform && !self.crash_times.is_empty() {
                    return Err(Error::Scheduler("use uniform-with-crashes to schedule crashes".into()));
                }
                if let Some(theta) = self.theta {
                    if theta > 1.0 / n as f64 + 1e-12 {
                        return Err(Error::Scheduler(format!(
                            "uniform scheduler gives each process 1/{n}, below theta = {theta}"
                        )));
                    }
                }
            }
            SchedulerKind::Weighted => {
                let weights = self.weights.as_ref().ok_or_else(|| Error::Scheduler("weighted scheduler needs weights".into()))?;
                let theta = self.theta.ok_or_else(|| Error::Scheduler("weighted scheduler needs theta".into()))?;
                if weights.len() != n {
                    return Err(Error::Scheduler(format!("{} weights for {n} processes", weights.len())));
                }
                let sum: f64 = weights.iter().sum();
                if !sum.is_finite() || (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                    return Err(Error::Scheduler(format!("weights sum to {sum}, not 1")));
                }
                if let Some((p, w)) = weights.iter().enumerate().find(|(_, &w)| !(w >= theta - 1e-12)) {
                    return Err(Error::Scheduler(format!("process {p} has weight {w}, below theta = {theta}")));
                }
            }
        }
        Ok(())
    }
}

/// A seeded source of process choices.
#[derive(Debug)]
pub struct Scheduler {
    weights: Option<Vec<f64>>,
    active: Vec<usize>,
    alias: Option<WeightedAliasIndex<f64>>,
    pending_crashes: Vec<(u64, usize)>,
    rng: ChaCha8Rng,
    step: u64,
}

pub fn make_scheduler(spec: &SchedulerSpec, n: usize, seed: u64) -> Result<Scheduler> {
    spec.validate(n)?;
    let mut pending_crashes: Vec<(u64, usize)> = spec.crash_times.iter().map(|(&p, &t)| (t, p)).collect();
    // Popped from the back, earliest first.
    pending_crashes.sort_unstable_by(|a, b| b.cmp(a));
    let mut scheduler = Scheduler {
        weights: spec.weights.clone(),
        active: (0..n).collect(),
        alias: None,
        pending_crashes,
        rng: ChaCha8Rng::seed_from_u64(seed),
        step: 0,
    };
    scheduler.rebuild()?;
    Ok(scheduler)
}

impl Scheduler {
    fn rebuild(&mut self) -> Result<()> {
        self.alias = match &self.weights {
            Some(w) if !self.active.is_empty() => {
                let active: Vec<f64> = self.active.iter().map(|&p| w[p]).collect();
                Some(WeightedAliasIndex::new(active).map_err(|e| Error::Scheduler(e.to_string()))?)
            }
            _ => None,
        };
        Ok(())
    }

    fn apply_crashes(&mut self) {
        let mut changed = false;
        while let Some(&(t, p)) = self.pending_crashes.last() {
            if t > self.step {
                break;
            }
            self.pending_crashes.pop();
            self.active.retain(|&a| a != p);
            changed = true;
        }
        if changed {
            // Remaining weights are positive, so the table always rebuilds.
            self.rebuild().expect("alias table over active weights");
        }
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Process scheduled at the current step, or `None` once every process has crashed.
    pub fn next_process(&mut self) -> Option<usize> {
        self.apply_crashes();
        if self.active.is_empty() {
            return None;
        }
        let pick = match &self.alias {
            Some(alias) => self.active[alias.sample(&mut self.rng)],
            None => self.active[self.rng.gen_range(0..self.active.len())],
        };
        self.step += 1;
        Some(pick)
    }
}
