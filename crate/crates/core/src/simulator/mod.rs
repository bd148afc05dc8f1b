//! Step-level simulation of lock-free algorithms under stochastic schedulers.
//!
//! A run draws one process per step from a [`Scheduler`] and executes one step
//! of that process on an [`Algorithm`] state machine. Runs are deterministic
//! given `(algorithm, n, steps, seed, scheduler)`.

mod machines;
mod progress;
mod scheduler;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use machines::{Algorithm, FaiMachine, ParallelMachine, ScuMachine, ScuProgram, UnboundedMachine};
pub use progress::{check_progress, max_progress_bound, ProcessProgress, ProgressReport};
pub use scheduler::{make_scheduler, Scheduler, SchedulerKind, SchedulerSpec};

/// Which algorithm a trace came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimModel {
    Scu,
    Fai,
    Parallel,
    Unbounded,
}

impl SimModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Scu => "scu",
            Self::Fai => "fai",
            Self::Parallel => "parallel",
            Self::Unbounded => "unbounded",
        }
    }
}

/// Output of one simulation run.
///
/// Step indices are 0-based. `successes` lists, in increasing order, every
/// step at which some process completed an operation; it is the sparse form
/// of the per-step success flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub model: SimModel,
    pub n: usize,
    pub q: usize,
    pub s: usize,
    pub seed: u64,
    /// Steps actually executed; fewer than requested only if every process crashed.
    pub total_steps: u64,
    /// Steps that latency estimators skip.
    pub warmup: u64,
    pub completions: Vec<Vec<u64>>,
    pub successes: Vec<u64>,
    pub steps_taken: Vec<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub crash_times: BTreeMap<usize, u64>,
    pub final_version: u64,
    /// Process scheduled at every step, when recording was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<u32>>,
}

impl Trace {
    pub fn total_successes(&self) -> usize {
        self.successes.len()
    }

    pub fn is_crashed_by(&self, process: usize, step: u64) -> bool {
        self.crash_times.get(&process).is_some_and(|&t| t <= step)
    }
}

/// Static description of a run, used to label its trace.
#[derive(Clone, Copy, Debug)]
pub struct RunLabel {
    pub model: SimModel,
    pub q: usize,
    pub s: usize,
    /// Steps one operation takes when run solo; sets the warm-up length.
    pub cycle: usize,
}

/// Drives `algorithm` for up to `steps` scheduled steps.
pub fn simulate<A: Algorithm>(
    algorithm: &mut A,
    label: RunLabel,
    steps: u64,
    seed: u64,
    scheduler: &SchedulerSpec,
    record_schedule: bool,
) -> Result<Trace> {
    let n = algorithm.num_processes();
    let mut sched = make_scheduler(scheduler, n, seed)?;
    let mut completions = vec![Vec::new(); n];
    let mut successes = Vec::new();
    let mut steps_taken = vec![0u64; n];
    let mut schedule = record_schedule.then(|| Vec::with_capacity(steps.min(1 << 28) as usize));
    let mut executed = 0u64;
    for step in 0..steps {
        let Some(p) = sched.next_process() else { break };
        executed += 1;
        steps_taken[p] += 1;
        if let Some(log) = schedule.as_mut() {
            log.push(p as u32);
        }
        if algorithm.step(p) {
            completions[p].push(step);
            successes.push(step);
        }
    }
    Ok(Trace {
        model: label.model,
        n,
        q: label.q,
        s: label.s,
        seed,
        total_steps: executed,
        warmup: 10 * (n * label.cycle) as u64,
        completions,
        successes,
        steps_taken,
        crash_times: scheduler.crash_times.clone(),
        final_version: algorithm.register_version(),
        schedule,
    })
}

pub fn run_scu(program: ScuProgram, n: usize, steps: u64, seed: u64, sched: &SchedulerSpec) -> Result<Trace> {
    let label = RunLabel { model: SimModel::Scu, q: program.q, s: program.s, cycle: program.solo_steps() };
    simulate(&mut ScuMachine::new(program, n), label, steps, seed, sched, false)
}

pub fn run_fai(n: usize, steps: u64, seed: u64, sched: &SchedulerSpec) -> Result<Trace> {
    let label = RunLabel { model: SimModel::Fai, q: 0, s: 1, cycle: 2 };
    simulate(&mut FaiMachine::new(n), label, steps, seed, sched, false)
}

pub fn run_parallel(n: usize, q: usize, steps: u64, seed: u64, sched: &SchedulerSpec) -> Result<Trace> {
    let label = RunLabel { model: SimModel::Parallel, q, s: 0, cycle: q };
    simulate(&mut ParallelMachine::new(n, q)?, label, steps, seed, sched, false)
}

/// Who won, and how much, in a run of the unbounded algorithm.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonopolyStats {
    pub first_winner: Option<usize>,
    pub total_successes: u64,
    pub first_winner_successes: u64,
    /// Longest run of consecutive failed CAS attempts, per process.
    pub longest_losing_streak: Vec<u64>,
}

impl MonopolyStats {
    /// The first winner took every success.
    pub fn is_monopoly(&self) -> bool {
        self.total_successes > 0 && self.first_winner_successes == self.total_successes
    }
}

pub fn run_unbounded_lf_trace(n: usize, steps: u64, seed: u64, sched: &SchedulerSpec) -> Result<(Trace, MonopolyStats)> {
    let label = RunLabel { model: SimModel::Unbounded, q: 0, s: 1, cycle: 0 };
    let mut machine = UnboundedMachine::new(n);
    let trace = simulate(&mut machine, label, steps, seed, sched, false)?;
    let first_winner = trace.completions.iter().enumerate().filter_map(|(p, c)| c.first().map(|&s| (s, p))).min().map(|(_, p)| p);
    let stats = MonopolyStats {
        first_winner,
        total_successes: trace.successes.len() as u64,
        first_winner_successes: first_winner.map_or(0, |p| trace.completions[p].len() as u64),
        longest_losing_streak: machine.longest_losing_streaks(),
    };
    Ok((trace, stats))
}

/// The unbounded lock-free algorithm under the uniform scheduler.
pub fn run_unbounded_lf(n: usize, steps: u64, seed: u64) -> MonopolyStats {
    run_unbounded_lf_trace(n, steps, seed, &SchedulerSpec::uniform())
        .expect("the uniform scheduler is valid for any n >= 1")
        .1
}
