//! Builders for the concrete chains: SCU(0,1), fetch-and-increment and
//! parallel code, each as an individual (per-process) chain, a system chain,
//! and the lifting map between them.

pub mod fai;
pub mod parallel;
pub mod scu;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::LiftingMap;
use crate::markov::{Chain, Prob};

pub use fai::{build_fai_global, build_fai_individual, build_fai_individual_with, fai_hitting_recurrence, fai_lifting_map};
pub use parallel::{build_parallel_individual, build_parallel_individual_with, build_parallel_system, parallel_lifting_map};
pub use scu::{
    build_scu_individual, build_scu_individual_with, build_scu_system, scu_lifting_map, ExtendedLocalState,
    ScuSystemState,
};

/// Which success edges an individual-chain builder marks as events.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Successes {
    All,
    /// Only the successes of this process (0-based).
    Process(usize),
}

impl Successes {
    fn counts(self, process: usize) -> bool {
        match self {
            Self::All => true,
            Self::Process(p) => p == process,
        }
    }

    fn check(self, n: usize) -> Result<()> {
        match self {
            Self::Process(p) if p >= n => Err(Error::OutOfRange(format!("process {p} out of range for n={n}"))),
            _ => Ok(()),
        }
    }
}

pub(crate) fn uniform_step(n: usize) -> Prob {
    Prob::new(1, n as i64)
}

/// The three model families that come as an individual/system pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Scu,
    Fai,
    Parallel,
}

/// An individual chain, its system chain, and the canonical map between them.
#[derive(Clone, Debug)]
pub struct ModelPair {
    pub individual: Chain,
    pub system: Chain,
    pub map: LiftingMap,
}

/// Builds the individual/system pair for a family. `q` is only used by the
/// parallel family.
pub fn model_pair(family: ModelFamily, n: usize, q: usize) -> Result<ModelPair> {
    Ok(match family {
        ModelFamily::Scu => ModelPair {
            individual: build_scu_individual(n)?,
            system: build_scu_system(n)?,
            map: scu_lifting_map(n)?,
        },
        ModelFamily::Fai => ModelPair {
            individual: build_fai_individual(n)?,
            system: build_fai_global(n)?,
            map: fai_lifting_map(n)?,
        },
        ModelFamily::Parallel => ModelPair {
            individual: build_parallel_individual(n, q)?,
            system: build_parallel_system(n, q)?,
            map: parallel_lifting_map(n, q)?,
        },
    })
}

/// Individual chain with only `process`'s successes marked.
pub fn individual_for_process(family: ModelFamily, n: usize, q: usize, process: usize) -> Result<Chain> {
    let only = Successes::Process(process);
    match family {
        ModelFamily::Scu => build_scu_individual_with(n, only),
        ModelFamily::Fai => build_fai_individual_with(n, only),
        ModelFamily::Parallel => build_parallel_individual_with(n, q, only),
    }
}
