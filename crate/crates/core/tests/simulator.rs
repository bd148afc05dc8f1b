use std::collections::BTreeMap;

use lockfree_latency::metrics::estimate_latencies;
use lockfree_latency::simulator::{
    check_progress, make_scheduler, max_progress_bound, run_parallel, run_scu, run_unbounded_lf,
    run_unbounded_lf_trace, simulate, Algorithm, RunLabel, SchedulerSpec, ScuMachine, ScuProgram, SimModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn within(actual: f64, expected: f64, rel: f64) -> bool {
    (actual - expected).abs() <= rel * expected
}

fn scu01() -> ScuProgram {
    ScuProgram::new(0, 1).unwrap()
}

#[test]
fn uniform_scheduler_passes_chi_square() {
    let mut sched = make_scheduler(&SchedulerSpec::uniform(), 4, 2024).unwrap();
    let mut counts = [0u64; 4];
    let draws = 1_000_000u64;
    for _ in 0..draws {
        counts[sched.next_process().unwrap()] += 1;
    }
    let expected = draws as f64 / 4.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 3 degrees of freedom, p = 0.001
    assert!(chi2 < 16.266, "chi2 = {chi2}, counts {counts:?}");
}

#[test]
fn weighted_scheduler_floor() {
    assert!(make_scheduler(&SchedulerSpec::weighted(vec![0.9, 0.1], 0.1), 2, 0).is_ok());
    assert!(make_scheduler(&SchedulerSpec::weighted(vec![0.95, 0.05], 0.1), 2, 0).is_err());
    assert!(make_scheduler(&SchedulerSpec::weighted(vec![0.5, 0.4], 0.1), 2, 0).is_err());
}

#[test]
fn weighted_scheduler_shares() {
    let mut sched = make_scheduler(&SchedulerSpec::weighted(vec![0.7, 0.2, 0.1], 0.1), 3, 5).unwrap();
    let mut counts = [0u64; 3];
    for _ in 0..1_000_000 {
        counts[sched.next_process().unwrap()] += 1;
    }
    for (c, w) in counts.iter().zip([0.7, 0.2, 0.1]) {
        assert!((*c as f64 / 1e6 - w).abs() < 0.005, "{counts:?}");
    }
}

#[test]
fn uniform_step_shares_are_one_over_n() {
    for n in [2usize, 5, 8] {
        let t = run_scu(scu01(), n, 1_000_000, 11, &SchedulerSpec::uniform()).unwrap();
        for (p, &taken) in t.steps_taken.iter().enumerate() {
            let share = taken as f64 / t.total_steps as f64;
            assert!(within(share, 1.0 / n as f64, 0.01), "n={n} p={p} share={share}");
        }
    }
}

#[test]
fn traces_are_deterministic() {
    let spec = SchedulerSpec::weighted(vec![0.5, 0.3, 0.2], 0.2);
    let a = run_scu(ScuProgram::new(2, 3).unwrap(), 3, 50_000, 99, &spec).unwrap();
    let b = run_scu(ScuProgram::new(2, 3).unwrap(), 3, 50_000, 99, &spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = run_scu(ScuProgram::new(2, 3).unwrap(), 3, 50_000, 100, &spec).unwrap();
    assert_ne!(a.successes, c.successes);
}

#[test]
fn version_counts_successes() {
    for (q, s) in [(0, 1), (3, 2), (10, 4)] {
        let t = run_scu(ScuProgram::new(q, s).unwrap(), 6, 200_000, 3, &SchedulerSpec::uniform()).unwrap();
        assert_eq!(t.final_version, t.successes.len() as u64);
        assert_eq!(t.completions.iter().map(Vec::len).sum::<usize>(), t.successes.len());
        for c in &t.completions {
            assert!(c.windows(2).all(|w| w[0] < w[1]));
        }
    }
}

#[test]
fn crashed_processes_are_never_scheduled() {
    let crashes: BTreeMap<usize, u64> = [(1, 0), (3, 5_000)].into_iter().collect();
    let spec = SchedulerSpec::uniform_with_crashes(crashes.clone());
    let program = scu01();
    let label = RunLabel { model: SimModel::Scu, q: 0, s: 1, cycle: program.solo_steps() };
    let t = simulate(&mut ScuMachine::new(program, 4), label, 100_000, 8, &spec, true).unwrap();
    let log = t.schedule.as_ref().unwrap();
    for (&p, &at) in &crashes {
        assert!(log.iter().enumerate().all(|(step, &q)| q as usize != p || (step as u64) < at));
        assert!(t.completions[p].iter().all(|&s| s < at));
    }
    assert_eq!(t.steps_taken[1], 0);
    let report = check_progress(&t, 10_000);
    assert!(report.all_complete_every_window());
}

#[test]
fn solo_runs_complete_exactly_one_operation() {
    for (q, s) in [(0, 1), (1, 1), (4, 2), (7, 5)] {
        let program = ScuProgram::new(q, s).unwrap();
        let mut m = ScuMachine::new(program, 3);
        let mut rng = ChaCha8Rng::seed_from_u64((q * 31 + s) as u64);
        for _ in 0..2_000 {
            // interleave a few random steps, then let one process at method start run solo
            for _ in 0..rng.gen_range(0..20) {
                m.step(rng.gen_range(0..3));
            }
            let Some(p) = (0..3).find(|&p| m.at_method_start(p)) else { continue };
            let done = (0..program.solo_steps()).filter(|_| m.step(p)).count();
            assert_eq!(done, 1, "q={q} s={s}");
            assert!(m.at_method_start(p));
        }
    }
}

#[test]
fn scu_two_matches_exact_latency() {
    let t = run_scu(scu01(), 2, 10_000_000, 1, &SchedulerSpec::uniform()).unwrap();
    let r = estimate_latencies(&t).unwrap();
    assert!(within(r.w, 20.0 / 7.0, 0.02), "W = {}", r.w);
    for w in r.individual() {
        assert!(within(w, 40.0 / 7.0, 0.03), "W_i = {w}");
    }
}

#[test]
fn scu_eight_individual_is_n_times_system() {
    let t = run_scu(scu01(), 8, 10_000_000, 2, &SchedulerSpec::uniform()).unwrap();
    let r = estimate_latencies(&t).unwrap();
    for w in r.individual() {
        assert!(within(w, 8.0 * r.w, 0.03), "W_i = {w}, W = {}", r.w);
    }
}

#[test]
fn parallel_latency_is_q() {
    let t = run_parallel(3, 4, 10_000_000, 4, &SchedulerSpec::uniform()).unwrap();
    let r = estimate_latencies(&t).unwrap();
    assert!(within(r.w, 4.0, 0.02), "W = {}", r.w);
    for w in r.individual() {
        assert!(within(w, 12.0, 0.03), "W_i = {w}");
    }
}

#[test]
fn scu_progress_in_every_window() {
    let t = run_scu(scu01(), 4, 1_000_000, 6, &SchedulerSpec::uniform()).unwrap();
    let report = check_progress(&t, 100_000);
    assert_eq!(report.full_windows, 10);
    assert!(report.all_complete_every_window());
    assert!(!report.has_window_exceeding_gap());
}

#[test]
fn unbounded_algorithm_starves_losers() {
    let (t, stats) = run_unbounded_lf_trace(8, 100_000, 3, &SchedulerSpec::uniform()).unwrap();
    assert!(stats.is_monopoly());
    assert!(stats.first_winner_successes <= stats.total_successes);
    assert!(check_progress(&t, 10_000).has_window_exceeding_gap());
}

#[test]
fn unbounded_solo_always_wins() {
    let stats = run_unbounded_lf(1, 1_000, 0);
    assert!(stats.is_monopoly());
    assert_eq!(stats.total_successes, 1_000);
}

#[test]
fn unbounded_two_process_baseline() {
    // Monte-Carlo baseline over seeds 0..1000, pinned from the first run.
    let mut winner_ahead = 0;
    for seed in 0..1000u64 {
        let (t, stats) = run_unbounded_lf_trace(2, 10_000, seed, &SchedulerSpec::uniform()).unwrap();
        let w = stats.first_winner.unwrap();
        if t.completions[w].len() >= t.completions[1 - w].len() {
            winner_ahead += 1;
        }
    }
    assert_eq!(winner_ahead, 984);
    assert!(winner_ahead >= 850);
}

#[test]
fn progress_bound_formula() {
    assert_eq!(max_progress_bound(1.0, 7).unwrap(), 1.0);
    assert_eq!(max_progress_bound(0.5, 3).unwrap(), 8.0);
    assert_eq!(max_progress_bound(0.25, 2).unwrap(), 16.0);
    assert!(max_progress_bound(0.0, 2).is_err());
    assert!(max_progress_bound(1.5, 2).is_err());
}
