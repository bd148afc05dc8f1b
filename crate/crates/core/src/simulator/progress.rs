use serde::{Deserialize, Serialize};

use super::Trace;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessProgress {
    pub completions: usize,
    /// Largest stretch of steps without a completion, counting the stretch
    /// from the start of the run and the one up to its end (or crash).
    pub max_gap: u64,
    /// Completed at least once in every full window the process was alive for.
    pub completed_every_window: bool,
    pub crashed_at: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub window: u64,
    pub full_windows: u64,
    pub processes: Vec<ProcessProgress>,
}

impl ProgressReport {
    /// Every process that did not crash completed in every window it lived through.
    pub fn all_complete_every_window(&self) -> bool {
        self.processes.iter().all(|p| p.completed_every_window)
    }

    /// Some process went a whole window without completing.
    pub fn has_window_exceeding_gap(&self) -> bool {
        self.processes.iter().any(|p| p.crashed_at.is_none() && p.max_gap > self.window)
    }
}

pub fn check_progress(trace: &Trace, window: u64) -> ProgressReport {
    let window = window.max(1);
    let full_windows = trace.total_steps / window;
    let processes = trace
        .completions
        .iter()
        .enumerate()
        .map(|(p, done)| {
            let crashed_at = trace.crash_times.get(&p).copied();
            let end = crashed_at.map_or(trace.total_steps, |c| c.min(trace.total_steps));
            // Gap boundaries: just before step 0, each completion, then the end.
            let mut prev: i128 = -1;
            let mut max_gap = 0u64;
            for &s in done.iter().chain(std::iter::once(&end)) {
                max_gap = max_gap.max((s as i128 - prev) as u64);
                prev = s as i128;
            }
            let mut hits = vec![false; full_windows as usize];
            for &s in done {
                if let Some(h) = hits.get_mut((s / window) as usize) {
                    *h = true;
                }
            }
            let required = crashed_at.map_or(full_windows, |c| (c / window).min(full_windows));
            ProcessProgress {
                completions: done.len(),
                max_gap,
                completed_every_window: hits[..required as usize].iter().all(|&h| h),
                crashed_at,
            }
        })
        .collect();
    ProgressReport { window, full_windows, processes }
}

/// `(1/θ)^T`: expected steps until every process completes, for a bounded
/// lock-free algorithm whose operations finish within `T` solo steps.
pub fn max_progress_bound(theta: f64, solo_steps: u32) -> Result<f64> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::OutOfRange(format!("theta must lie in (0, 1], got {theta}")));
    }
    if solo_steps == 0 {
        return Err(Error::OutOfRange("T must be at least 1".into()));
    }
    Ok(theta.recip().powi(solo_steps as i32))
}
