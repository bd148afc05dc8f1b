//! Exact Markov-chain models and step-level simulation of lock-free
//! algorithms running under stochastic schedulers.
//!
//! The crate is organised bottom-up:
//!
//! * [`markov`]: generic finite chains and their stationary quantities.
//! * [`lifting`]: checks that one chain is a lifting of another.
//! * [`models`]: builders for the SCU, fetch-and-increment and parallel-code chains.
//! * [`simulator`]: schedulers and step-level simulation of the algorithms.
//! * [`binsgame`]: the iterated balls-into-bins game.
//! * [`metrics`]: latency estimation, sweeps and scaling fits.
//! * [`cli`]: the `lfl` command-line front end.

pub mod binsgame;
pub mod cli;
pub mod error;
pub mod lifting;
pub mod markov;
pub mod metrics;
pub mod models;
pub mod simulator;

pub use error::{Error, Result};
