use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::Trace;

/// Batches used for batch-means standard errors.
pub const BATCHES: usize = 30;
/// Fewest post-warm-up successes `estimate_latencies` accepts.
pub const MIN_SUCCESSES: usize = 100;

/// Mean and batch-means standard error of an autocorrelated sample.
/// The standard error is NaN for fewer than [`BATCHES`] samples.
pub fn batch_means(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let size = samples.len() / BATCHES;
    if size == 0 {
        return (mean, f64::NAN);
    }
    let batch: Vec<f64> = samples
        .chunks_exact(size)
        .take(BATCHES)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let bm = batch.iter().sum::<f64>() / BATCHES as f64;
    let var = batch.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    (mean, (var / BATCHES as f64).sqrt())
}

fn gaps(steps: &[u64], from: u64) -> Vec<f64> {
    let start = steps.partition_point(|&s| s < from);
    steps[start..].windows(2).map(|w| (w[1] - w[0]) as f64).collect()
}

/// Empirical latencies of a trace, in system steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    /// Mean steps between consecutive completions of any process.
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "W_se")]
    pub w_se: f64,
    pub w_samples: usize,
    /// Mean steps between consecutive completions of each process; `None`
    /// when the process completed fewer than twice after warm-up.
    #[serde(rename = "W_i")]
    pub w_i: Vec<Option<f64>>,
    #[serde(rename = "W_i_se")]
    pub w_i_se: Vec<Option<f64>>,
    pub w_i_samples: Vec<usize>,
    /// Individual latency counted in the process's own steps.
    pub own_steps_i: Vec<Option<f64>>,
    /// Successes per measured step.
    pub completion_rate: f64,
    pub completion_rate_se: f64,
    /// Per-step success probability estimate; equal to `completion_rate`.
    pub mu: f64,
    pub warmup: u64,
    pub measured_steps: u64,
}

impl LatencyReport {
    /// Latencies of the processes that have one.
    pub fn individual(&self) -> impl Iterator<Item = f64> + '_ {
        self.w_i.iter().flatten().copied()
    }

    pub fn min_individual(&self) -> Option<f64> {
        self.individual().reduce(f64::min)
    }

    pub fn max_individual(&self) -> Option<f64> {
        self.individual().reduce(f64::max)
    }
}

/// Estimates latencies after discarding the trace's warm-up prefix.
pub fn estimate_latencies(trace: &Trace) -> Result<LatencyReport> {
    estimate_latencies_after(trace, trace.warmup)
}

pub fn estimate_latencies_after(trace: &Trace, warmup: u64) -> Result<LatencyReport> {
    let warmup = warmup.min(trace.total_steps);
    let measured = trace.successes.len() - trace.successes.partition_point(|&s| s < warmup);
    if measured < MIN_SUCCESSES {
        return Err(Error::TooFewSuccesses { found: measured, needed: MIN_SUCCESSES });
    }
    let (w, w_se) = batch_means(&gaps(&trace.successes, warmup));
    let mut w_i = Vec::with_capacity(trace.n);
    let mut w_i_se = Vec::with_capacity(trace.n);
    let mut w_i_samples = Vec::with_capacity(trace.n);
    let mut own_steps_i = Vec::with_capacity(trace.n);
    for (p, done) in trace.completions.iter().enumerate() {
        let g = gaps(done, warmup);
        w_i_samples.push(g.len());
        if g.is_empty() {
            w_i.push(None);
            w_i_se.push(None);
            own_steps_i.push(None);
            continue;
        }
        let (m, se) = batch_means(&g);
        w_i.push(Some(m));
        w_i_se.push(Some(se));
        own_steps_i.push(Some(m * trace.steps_taken[p] as f64 / trace.total_steps as f64));
    }

    let measured_steps = trace.total_steps - warmup;
    let completion_rate = measured as f64 / measured_steps as f64;
    // Batch means of the success indicator over equal slices of the measured steps.
    let slice = measured_steps / BATCHES as u64;
    let completion_rate_se = if slice == 0 {
        f64::NAN
    } else {
        let mut counts = vec![0f64; BATCHES];
        for &s in &trace.successes[trace.successes.len() - measured..] {
            let k = ((s - warmup) / slice) as usize;
            if k < BATCHES {
                counts[k] += 1.0;
            }
        }
        let rates: Vec<f64> = counts.iter().map(|c| c / slice as f64).collect();
        let m = rates.iter().sum::<f64>() / BATCHES as f64;
        let var = rates.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
        (var / BATCHES as f64).sqrt()
    };
    Ok(LatencyReport {
        w,
        w_se,
        w_samples: measured - 1,
        w_i,
        w_i_se,
        w_i_samples,
        own_steps_i,
        completion_rate,
        completion_rate_se,
        mu: completion_rate,
        warmup,
        measured_steps,
    })
}
