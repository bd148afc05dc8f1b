//! Finite Markov chains: construction, validation, ergodicity, stationary
//! distributions, hitting and return times, ergodic flows and event rates.

mod chain;
pub mod io;
mod solve;

pub use chain::{to_f64 as prob_to_f64, Chain, ChainBuilder, Prob, SparseRows, Transition, ValidationReport};
pub use solve::{
    empirical_event_gap, ergodic_flow, event_rate, expected_hitting_time, expected_return_time,
    solve_event_rate, stationary, Distribution, EventRate, FlowMatrix, DENSE_LIMIT, MAX_ITERATIONS,
};
