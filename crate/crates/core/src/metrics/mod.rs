//! Latency estimation, exact-vs-simulated comparisons, sweeps and scaling fits.

mod latency;
mod output;
mod sweep;

pub use latency::{batch_means, estimate_latencies, estimate_latencies_after, LatencyReport, BATCHES, MIN_SUCCESSES};
pub use output::{curve_dat, format_number, sweep_csv, CSV_DIGITS, SWEEP_HEADER};
pub use sweep::{
    compare_exact_vs_sim, completion_curve, crash_sweep, exact_latency, fit_scaling, point_seed, simulate_model,
    sweep, Budget, ComparisonReport, CurvePoint, ScalingFit, Source, SweepResult, SweepRow,
};
