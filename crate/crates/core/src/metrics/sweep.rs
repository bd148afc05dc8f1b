use std::thread;

use serde::{Deserialize, Serialize};

use super::latency::{estimate_latencies, LatencyReport};
use crate::binsgame::{run_bins, BinsConfig};
use crate::error::{Error, Result};
use crate::markov::{solve_event_rate, DENSE_LIMIT};
use crate::models::{self, fai, parallel, scu, ModelFamily};
use crate::simulator::{run_fai, run_parallel, run_scu, SchedulerSpec, ScuProgram, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Exact,
    Sim,
    Bins,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Sim => "sim",
            Self::Bins => "bins",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub q: usize,
    pub s: usize,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "W_over_sqrt_n")]
    pub w_over_sqrt_n: f64,
    pub completion_rate: f64,
    pub source: Source,
}

impl SweepRow {
    fn new(n: usize, q: usize, s: usize, w: f64, completion_rate: f64, source: Source) -> Self {
        Self { n, q, s, w, w_over_sqrt_n: w / (n as f64).sqrt(), completion_rate, source }
    }
}

/// Work allowance for a sweep: steps (sim) or phases (bins) per point, and
/// an optional cap on the summed work, where an exact point costs its state count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub work_per_point: u64,
    pub max_total_work: Option<u64>,
}

impl Budget {
    pub fn per_point(work: u64) -> Self {
        Self { work_per_point: work, max_total_work: None }
    }
}

/// Least-squares fit of `W(n) − q ≈ C·n^γ` in log-log space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub gamma: f64,
    pub coefficient: f64,
    pub points_used: usize,
    /// `W − q` vanished at every fitted point, so `γ = 0` and `C = 0`.
    pub flat: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub fit: Option<ScalingFit>,
    /// Points were dropped because the total budget ran out.
    pub partial: bool,
    pub skipped_n: Vec<usize>,
}

/// Fits over the largest half of the rows (at least two points).
pub fn fit_scaling(rows: &[SweepRow], q: usize) -> Option<ScalingFit> {
    if rows.len() < 2 {
        return None;
    }
    let take = rows.len().div_ceil(2).max(2);
    let window = &rows[rows.len() - take..];
    let qf = q as f64;
    let flat_tol = 1e-9 * qf.max(1.0);
    if window.iter().all(|r| (r.w - qf).abs() <= flat_tol) {
        return Some(ScalingFit { gamma: 0.0, coefficient: 0.0, points_used: window.len(), flat: true });
    }
    let pts: Vec<(f64, f64)> =
        window.iter().filter(|r| r.w - qf > flat_tol).map(|r| ((r.n as f64).ln(), (r.w - qf).ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let gamma = sxy / sxx;
    Some(ScalingFit { gamma, coefficient: (my - gamma * mx).exp(), points_used: pts.len(), flat: false })
}

fn exact_states(model: ModelFamily, n: usize, q: usize) -> u64 {
    match model {
        ModelFamily::Scu => ((n + 1) * (n + 2) / 2 - 1) as u64,
        ModelFamily::Fai => n as u64,
        ModelFamily::Parallel => parallel::occupancy_states_count(n, q),
    }
}

/// System latency of the exact chain and its per-step success probability.
pub fn exact_latency(model: ModelFamily, n: usize, q: usize, s: usize) -> Result<(f64, f64)> {
    let chain = match model {
        ModelFamily::Scu => {
            if q != 0 || s != 1 {
                return Err(Error::Unsupported(format!("no exact chain for SCU({q},{s}); only SCU(0,1)")));
            }
            scu::build_scu_system(n)?
        }
        ModelFamily::Fai => fai::build_fai_global(n)?,
        ModelFamily::Parallel => parallel::build_parallel_system(n, q)?,
    };
    let rate = solve_event_rate(&chain)?;
    Ok((rate.latency, rate.mu))
}

/// Runs the simulator for one model point under `sched`.
pub fn simulate_model(
    model: ModelFamily,
    n: usize,
    q: usize,
    s: usize,
    steps: u64,
    seed: u64,
    sched: &SchedulerSpec,
) -> Result<Trace> {
    match model {
        ModelFamily::Scu => run_scu(ScuProgram::new(q, s)?, n, steps, seed, sched),
        ModelFamily::Fai => run_fai(n, steps, seed, sched),
        ModelFamily::Parallel => run_parallel(n, q, steps, seed, sched),
    }
}

fn sweep_point(model: ModelFamily, n: usize, q: usize, s: usize, mode: Source, work: u64, seed: u64) -> Result<SweepRow> {
    match mode {
        Source::Exact => {
            let (w, mu) = exact_latency(model, n, q, s)?;
            Ok(SweepRow::new(n, q, s, w, mu, mode))
        }
        Source::Sim => {
            let trace = simulate_model(model, n, q, s, work, seed, &SchedulerSpec::uniform())?;
            let r = estimate_latencies(&trace)?;
            Ok(SweepRow::new(n, q, s, r.w, r.completion_rate, mode))
        }
        Source::Bins => {
            if model != ModelFamily::Scu || q != 0 || s != 1 {
                return Err(Error::Unsupported("bins mode models SCU(0,1) only".into()));
            }
            let records = run_bins(&BinsConfig::new(n, work as usize, seed))?;
            let w = records.iter().map(|r| r.length).sum::<u64>() as f64 / records.len() as f64;
            Ok(SweepRow::new(n, q, s, w, 1.0 / w, mode))
        }
    }
}

/// Seed of the `index`-th sweep point.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

/// One row per `n`, computed concurrently and returned in `n_list` order.
pub fn sweep(
    model: ModelFamily,
    n_list: &[usize],
    q: usize,
    s: usize,
    mode: Source,
    budget: Budget,
    seed: u64,
) -> Result<SweepResult> {
    if n_list.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::OutOfRange("n_list must be sorted ascending".into()));
    }
    let mut planned = Vec::new();
    let mut skipped_n = Vec::new();
    let mut spent = 0u64;
    for (i, &n) in n_list.iter().enumerate() {
        let cost = match mode {
            Source::Exact => exact_states(model, n, q),
            _ => budget.work_per_point,
        };
        if budget.max_total_work.is_some_and(|cap| spent + cost > cap) {
            skipped_n.push(n);
            continue;
        }
        spent += cost;
        planned.push((i, n));
    }
    let workers = thread::available_parallelism().map_or(1, |p| p.get()).min(planned.len().max(1));
    let mut results: Vec<Option<Result<SweepRow>>> = (0..planned.len()).map(|_| None).collect();
    thread::scope(|scope| {
        let chunks: Vec<_> = results
            .chunks_mut(planned.len().div_ceil(workers).max(1))
            .zip(planned.chunks(planned.len().div_ceil(workers).max(1)))
            .map(|(out, points)| {
                scope.spawn(move || {
                    for (slot, &(i, n)) in out.iter_mut().zip(points) {
                        *slot = Some(sweep_point(model, n, q, s, mode, budget.work_per_point, point_seed(seed, i)));
                    }
                })
            })
            .collect();
        for handle in chunks {
            handle.join().expect("sweep worker panicked");
        }
    });
    let rows = results.into_iter().map(|r| r.expect("every planned point ran")).collect::<Result<Vec<_>>>()?;
    let fit = fit_scaling(&rows, q);
    Ok(SweepResult { rows, fit, partial: !skipped_n.is_empty(), skipped_n })
}

/// Latency of `n` processes of which only `k_correct` never crash (the rest
/// crash at step 0).
pub fn crash_sweep(n: usize, k_correct: usize, q: usize, s: usize, steps: u64, seed: u64) -> Result<SweepRow> {
    if k_correct == 0 || k_correct > n {
        return Err(Error::OutOfRange(format!("need 1 <= k_correct <= n, got k={k_correct}, n={n}")));
    }
    let trace = run_scu(ScuProgram::new(q, s)?, n, steps, seed, &SchedulerSpec::with_correct(n, k_correct))?;
    let r = estimate_latencies(&trace)?;
    Ok(SweepRow::new(n, q, s, r.w, r.completion_rate, Source::Sim))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub model: ModelFamily,
    pub n: usize,
    pub q: usize,
    pub s: usize,
    pub exact_w: f64,
    /// Exact individual latency: from the individual chain when it is small
    /// enough to solve directly, otherwise `n × W`.
    pub exact_w_i: f64,
    pub exact_w_i_from_chain: bool,
    pub sim: LatencyReport,
    pub w_relative_error: f64,
    pub w_i_relative_error: Vec<Option<f64>>,
}

impl ComparisonReport {
    pub fn max_w_i_relative_error(&self) -> f64 {
        self.w_i_relative_error.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }
}

pub fn compare_exact_vs_sim(model: ModelFamily, n: usize, q: usize, s: usize, steps: u64, seed: u64) -> Result<ComparisonReport> {
    let (exact_w, _) = exact_latency(model, n, q, s)?;
    let individual_states = match model {
        ModelFamily::Scu if n <= scu::MAX_INDIVIDUAL_N => Some(3u64.pow(n as u32) - 1),
        ModelFamily::Fai if n <= fai::MAX_INDIVIDUAL_N => Some((1u64 << n) - 1),
        ModelFamily::Parallel => (q as u64).checked_pow(n as u32),
        _ => None,
    };
    let (exact_w_i, exact_w_i_from_chain) = match individual_states {
        Some(k) if k <= DENSE_LIMIT as u64 => {
            let chain = models::individual_for_process(model, n, q, 0)?;
            (solve_event_rate(&chain)?.latency, true)
        }
        _ => (n as f64 * exact_w, false),
    };
    let trace = simulate_model(model, n, q, s, steps, seed, &SchedulerSpec::uniform())?;
    let sim = estimate_latencies(&trace)?;
    let w_relative_error = (sim.w - exact_w).abs() / exact_w;
    let w_i_relative_error = sim.w_i.iter().map(|w| w.map(|w| (w - exact_w_i).abs() / exact_w_i)).collect();
    Ok(ComparisonReport {
        model,
        n,
        q,
        s,
        exact_w,
        exact_w_i,
        exact_w_i_from_chain,
        sim,
        w_relative_error,
        w_i_relative_error,
    })
}

/// One line of a completion-rate curve with its reference shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub rate: f64,
    /// `C/√n` with `C` chosen so the first point matches.
    pub sqrt_reference: f64,
    /// `1/n`, the worst-case rate.
    pub worst_case: f64,
}

pub fn completion_curve(rows: &[SweepRow]) -> Vec<CurvePoint> {
    let Some(first) = rows.first() else { return Vec::new() };
    let scale = first.completion_rate * (first.n as f64).sqrt();
    rows.iter()
        .map(|r| CurvePoint {
            n: r.n,
            rate: r.completion_rate,
            sqrt_reference: scale / (r.n as f64).sqrt(),
            worst_case: 1.0 / r.n as f64,
        })
        .collect()
}
