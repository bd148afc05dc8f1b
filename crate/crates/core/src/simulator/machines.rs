//! Step-level state machines for the simulated algorithms.
//!
//! The decision register is modelled as a version counter: no two processes
//! ever propose the same value, so a CAS succeeds exactly when the register
//! still holds the version the process last read.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ExtendedLocalState;

/// A shared-memory algorithm executed one scheduled step at a time.
pub trait Algorithm {
    fn num_processes(&self) -> usize;

    /// Runs one step of `process`; true when the step completes an operation.
    fn step(&mut self, process: usize) -> bool;

    /// Number of successful updates of the shared object so far.
    fn register_version(&self) -> u64;
}

/// SCU(q, s): `q` preamble steps, then a loop of `s` reads (the first one of
/// the decision register) followed by one CAS.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScuProgram {
    pub q: usize,
    pub s: usize,
}

impl ScuProgram {
    pub fn new(q: usize, s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::OutOfRange("SCU scan length s must be at least 1".into()));
        }
        Ok(Self { q, s })
    }

    /// Steps a process needs to complete an operation running alone.
    pub fn solo_steps(&self) -> usize {
        self.q + self.s + 1
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct ScuProcess {
    pc: usize,
    observed: u64,
}

#[derive(Clone, Debug)]
pub struct ScuMachine {
    program: ScuProgram,
    version: u64,
    processes: Vec<ScuProcess>,
}

impl ScuMachine {
    pub fn new(program: ScuProgram, n: usize) -> Self {
        Self { program, version: 0, processes: vec![ScuProcess::default(); n] }
    }

    /// Read when the process is anywhere before its CAS, otherwise CCAS or
    /// OldCAS depending on whether its view is still current.
    pub fn extended_state(&self, process: usize) -> ExtendedLocalState {
        let p = &self.processes[process];
        if p.pc < self.program.q + self.program.s {
            ExtendedLocalState::Read
        } else if p.observed == self.version {
            ExtendedLocalState::Ccas
        } else {
            ExtendedLocalState::OldCas
        }
    }

    /// True when the process is at the start of a method call.
    pub fn at_method_start(&self, process: usize) -> bool {
        self.processes[process].pc == 0
    }
}

impl Algorithm for ScuMachine {
    fn num_processes(&self) -> usize {
        self.processes.len()
    }

    fn step(&mut self, process: usize) -> bool {
        let ScuProgram { q, s } = self.program;
        let p = &mut self.processes[process];
        if p.pc == q {
            p.observed = self.version;
        }
        if p.pc < q + s {
            p.pc += 1;
            return false;
        }
        if p.observed == self.version {
            self.version += 1;
            p.pc = 0;
            true
        } else {
            p.pc = q;
            false
        }
    }

    fn register_version(&self) -> u64 {
        self.version
    }
}

/// Fetch-and-increment with a CAS that returns the current value on failure:
/// a process either holds the current value (its next CAS wins) or learns it
/// from the failed CAS.
#[derive(Clone, Debug)]
pub struct FaiMachine {
    version: u64,
    local: Vec<u64>,
}

impl FaiMachine {
    pub fn new(n: usize) -> Self {
        Self { version: 0, local: vec![0; n] }
    }

    pub fn is_current(&self, process: usize) -> bool {
        self.local[process] == self.version
    }
}

impl Algorithm for FaiMachine {
    fn num_processes(&self) -> usize {
        self.local.len()
    }

    fn step(&mut self, process: usize) -> bool {
        let success = self.local[process] == self.version;
        if success {
            self.version += 1;
        }
        self.local[process] = self.version;
        success
    }

    fn register_version(&self) -> u64 {
        self.version
    }
}

/// Parallel code: every operation is `q` independent steps.
#[derive(Clone, Debug)]
pub struct ParallelMachine {
    q: usize,
    counters: Vec<usize>,
    completed: u64,
}

impl ParallelMachine {
    pub fn new(n: usize, q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::OutOfRange("parallel code needs q >= 1".into()));
        }
        Ok(Self { q, counters: vec![0; n], completed: 0 })
    }

    pub fn counters(&self) -> &[usize] {
        &self.counters
    }
}

impl Algorithm for ParallelMachine {
    fn num_processes(&self) -> usize {
        self.counters.len()
    }

    fn step(&mut self, process: usize) -> bool {
        let c = &mut self.counters[process];
        *c += 1;
        if *c == self.q {
            *c = 0;
            self.completed += 1;
            true
        } else {
            false
        }
    }

    fn register_version(&self) -> u64 {
        self.completed
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct UnboundedProcess {
    expected: u64,
    dummy_left: u64,
    losing_streak: u64,
    longest_losing_streak: u64,
}

/// The unbounded lock-free counter: after a failed CAS that returned `v`, a
/// process performs `n²·v` dummy reads before trying again. A winner keeps
/// the value it wrote and retries immediately.
#[derive(Clone, Debug)]
pub struct UnboundedMachine {
    counter: u64,
    backoff_scale: u64,
    processes: Vec<UnboundedProcess>,
}

impl UnboundedMachine {
    pub fn new(n: usize) -> Self {
        let n64 = n as u64;
        Self { counter: 0, backoff_scale: n64 * n64, processes: vec![UnboundedProcess::default(); n] }
    }

    /// Longest run of consecutive failed CAS attempts, per process.
    pub fn longest_losing_streaks(&self) -> Vec<u64> {
        self.processes.iter().map(|p| p.longest_losing_streak).collect()
    }
}

impl Algorithm for UnboundedMachine {
    fn num_processes(&self) -> usize {
        self.processes.len()
    }

    fn step(&mut self, process: usize) -> bool {
        let p = &mut self.processes[process];
        if p.dummy_left > 0 {
            p.dummy_left -= 1;
            return false;
        }
        if p.expected == self.counter {
            self.counter += 1;
            p.expected = self.counter;
            p.losing_streak = 0;
            true
        } else {
            p.expected = self.counter;
            p.dummy_left = self.backoff_scale.saturating_mul(self.counter);
            p.losing_streak += 1;
            p.longest_losing_streak = p.longest_losing_streak.max(p.losing_streak);
            false
        }
    }

    fn register_version(&self) -> u64 {
        self.counter
    }
}
