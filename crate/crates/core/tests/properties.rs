use lockfree_latency::binsgame::{run_bins, BinsConfig};
use lockfree_latency::lifting::{check_lumpability, verify_lifting, LiftingMap};
use lockfree_latency::markov::{
    ergodic_flow, expected_hitting_time, expected_return_time, io, solve_event_rate, stationary, Chain, ChainBuilder,
    Prob,
};
use lockfree_latency::metrics::{batch_means, format_number};
use lockfree_latency::models::scu;
use lockfree_latency::simulator::{run_scu, SchedulerSpec, ScuProgram};
use proptest::prelude::*;

/// An irreducible chain: a ring `i → i+1` plus random extra edges, with
/// integer weights normalised per row. Ring edges out of even states are events.
fn random_chain() -> impl Strategy<Value = Chain> {
    (2usize..12).prop_flat_map(|n| {
        let extras = prop::collection::vec((0..n, 0..n, 1i64..6), 0..3 * n);
        let ring = prop::collection::vec(1i64..6, n);
        (Just(n), ring, extras).prop_map(|(n, ring, extras)| {
            let mut weights = vec![Vec::new(); n];
            for (i, &w) in ring.iter().enumerate() {
                weights[i].push(((i + 1) % n, w, i % 2 == 0));
            }
            for (from, to, w) in extras {
                weights[from].push((to, w, false));
            }
            let mut b = ChainBuilder::with_states(n);
            for (i, row) in weights.iter().enumerate() {
                let total: i64 = row.iter().map(|e| e.1).sum();
                for &(to, w, event) in row {
                    let p = Prob::new(w, total);
                    if event {
                        b.add_event(i, to, p);
                    } else {
                        b.add(i, to, p);
                    }
                }
            }
            b.build().unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_is_a_fixed_point(chain in random_chain()) {
        prop_assert!(chain.validate().is_valid());
        prop_assert!(chain.is_irreducible());
        let pi = stationary(&chain, 1e-12).unwrap();
        prop_assert!((pi.total() - 1.0).abs() < 1e-12);
        prop_assert!(pi.probabilities.iter().all(|&p| p > 0.0));
        prop_assert!(pi.residual(&chain) < 1e-12);
    }

    #[test]
    fn return_time_is_inverse_stationary(chain in random_chain(), pick in 0usize..100) {
        let state = pick % chain.num_states();
        let pi = stationary(&chain, 1e-12).unwrap();
        let ret = expected_return_time(&chain, state).unwrap();
        let hit = expected_hitting_time(&chain, state, state).unwrap();
        prop_assert!((ret * pi.get(state) - 1.0).abs() < 1e-9);
        prop_assert!((hit - ret).abs() < 1e-8 * ret);
    }

    #[test]
    fn ergodic_flow_is_balanced(chain in random_chain()) {
        let pi = stationary(&chain, 1e-12).unwrap();
        let flow = ergodic_flow(&chain, &pi).unwrap();
        prop_assert!((flow.total() - 1.0).abs() < 1e-12);
        prop_assert!(flow.max_imbalance() < 1e-12);
    }

    #[test]
    fn event_rate_is_positive_and_inverse(chain in random_chain()) {
        let r = solve_event_rate(&chain).unwrap();
        prop_assert!(r.mu > 0.0 && r.mu <= 1.0);
        prop_assert!((r.latency * r.mu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_is_exact(chain in random_chain()) {
        let back = io::from_json(&io::to_json(&chain).unwrap()).unwrap();
        prop_assert_eq!(back.num_states(), chain.num_states());
        for (i, row) in chain.rows() {
            prop_assert_eq!(row, back.row(i));
        }
    }

    #[test]
    fn identity_map_is_an_exact_lifting(chain in random_chain()) {
        let map = LiftingMap::identity(chain.num_states());
        let report = verify_lifting(&chain, &chain, &map, 1e-9).unwrap();
        prop_assert!(report.is_lifting());
        prop_assert!(check_lumpability(&chain, &chain, &map).unwrap().is_exact());
    }

    #[test]
    fn swapping_across_fibers_breaks_scu_lifting(x in 0usize..26, y in 0usize..26) {
        let map = scu::scu_lifting_map(3).unwrap();
        prop_assume!(map.coarse_of(x) != map.coarse_of(y));
        let fine = scu::build_scu_individual(3).unwrap();
        let coarse = scu::build_scu_system(3).unwrap();
        let report = verify_lifting(&fine, &coarse, &map.swapped(x, y).unwrap(), 1e-9).unwrap();
        prop_assert!(!report.is_lifting());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scu_trace_invariants(n in 1usize..9, q in 0usize..6, s in 1usize..4, seed in any::<u64>()) {
        let t = run_scu(ScuProgram::new(q, s).unwrap(), n, 20_000, seed, &SchedulerSpec::uniform()).unwrap();
        prop_assert_eq!(t.final_version, t.successes.len() as u64);
        prop_assert_eq!(t.steps_taken.iter().sum::<u64>(), t.total_steps);
        prop_assert!(t.successes.windows(2).all(|w| w[0] < w[1]));
        let mut merged: Vec<u64> = t.completions.iter().flatten().copied().collect();
        merged.sort_unstable();
        prop_assert_eq!(merged, t.successes.clone());
    }

    #[test]
    fn phase_starts_sum_to_n(n in 1usize..200, seed in any::<u64>()) {
        for r in run_bins(&BinsConfig::new(n, 500, seed)).unwrap() {
            prop_assert_eq!(r.a_start + r.b_start, n);
            prop_assert!(r.length >= 1);
        }
    }

    #[test]
    fn full_precision_numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(format_number(x, true).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn rounded_numbers_keep_six_digits(x in 1e-4f64..1e5) {
        let y: f64 = format_number(x, false).parse().unwrap();
        prop_assert!((y - x).abs() <= 5e-6 * x);
    }

    #[test]
    fn batch_mean_is_sample_mean(v in prop::collection::vec(0.0f64..100.0, 30..300)) {
        let (mean, se) = batch_means(&v);
        let direct = v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!((mean - direct).abs() < 1e-9);
        prop_assert!(se >= 0.0);
    }
}
