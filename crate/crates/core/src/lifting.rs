//! Checks that a surjection between two chains is a lifting: the fine
//! chain's ergodic flows, summed over pairs of fibers, equal the coarse
//! chain's flows. Stationary aggregation and fiber symmetry are checked too.
//!
//! Both chains always come from their own builders; nothing here derives the
//! coarse transitions from the map.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{ergodic_flow, stationary, Chain, Distribution};

const SOLVE_TOLERANCE: f64 = 1e-13;

/// Total surjective map from fine states to coarse states, with its fibers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MapDocument", into = "MapDocument")]
pub struct LiftingMap {
    fine_to_coarse: Vec<usize>,
    fibers: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MapDocument {
    num_coarse: usize,
    fine_to_coarse: Vec<usize>,
}

impl TryFrom<MapDocument> for LiftingMap {
    type Error = Error;
    fn try_from(doc: MapDocument) -> Result<Self> {
        LiftingMap::new(doc.fine_to_coarse, doc.num_coarse)
    }
}

impl From<LiftingMap> for MapDocument {
    fn from(map: LiftingMap) -> Self {
        MapDocument { num_coarse: map.num_coarse(), fine_to_coarse: map.fine_to_coarse }
    }
}

impl LiftingMap {
    pub fn new(fine_to_coarse: Vec<usize>, num_coarse: usize) -> Result<Self> {
        let mut fibers = vec![Vec::new(); num_coarse];
        for (x, &c) in fine_to_coarse.iter().enumerate() {
            let fiber = fibers
                .get_mut(c)
                .ok_or_else(|| Error::InvalidMap(format!("fine state {x} maps to {c}, beyond {num_coarse} coarse states")))?;
            fiber.push(x);
        }
        if let Some(empty) = fibers.iter().position(Vec::is_empty) {
            return Err(Error::InvalidMap(format!("not surjective: coarse state {empty} has an empty fiber")));
        }
        Ok(Self { fine_to_coarse, fibers })
    }

    pub fn identity(n: usize) -> Self {
        Self { fine_to_coarse: (0..n).collect(), fibers: (0..n).map(|i| vec![i]).collect() }
    }

    pub fn num_fine(&self) -> usize {
        self.fine_to_coarse.len()
    }

    pub fn num_coarse(&self) -> usize {
        self.fibers.len()
    }

    pub fn coarse_of(&self, fine: usize) -> usize {
        self.fine_to_coarse[fine]
    }

    pub fn fiber(&self, coarse: usize) -> &[usize] {
        &self.fibers[coarse]
    }

    pub fn fibers(&self) -> &[Vec<usize>] {
        &self.fibers
    }

    /// Exchanges the images of two fine states. Used to build negative controls.
    pub fn swapped(&self, x: usize, y: usize) -> Result<Self> {
        let mut f = self.fine_to_coarse.clone();
        f.swap(x, y);
        Self::new(f, self.num_coarse())
    }

    fn check_dims(&self, fine: &Chain, coarse: &Chain) -> Result<()> {
        if fine.num_states() != self.num_fine() {
            return Err(Error::DimensionMismatch { expected: self.num_fine(), actual: fine.num_states() });
        }
        if coarse.num_states() != self.num_coarse() {
            return Err(Error::DimensionMismatch { expected: self.num_coarse(), actual: coarse.num_states() });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftingReport {
    pub flow_homomorphism_ok: bool,
    pub max_flow_residual: f64,
    pub aggregation_ok: bool,
    pub max_aggregation_residual: f64,
    pub fiber_symmetry_ok: bool,
    pub max_fiber_spread: f64,
    pub tolerance: f64,
}

impl LiftingReport {
    /// A lifting needs the flow homomorphism; aggregation is its consequence.
    /// Fiber symmetry is a property of the shipped maps, not of liftings in general.
    pub fn is_lifting(&self) -> bool {
        self.flow_homomorphism_ok && self.aggregation_ok
    }
}

/// Sums fiber masses: `π_k = Σ_{x ∈ f⁻¹(k)} π′_x`.
pub fn aggregate_distribution(fine_pi: &Distribution, map: &LiftingMap) -> Result<Distribution> {
    if fine_pi.len() != map.num_fine() {
        return Err(Error::DimensionMismatch { expected: map.num_fine(), actual: fine_pi.len() });
    }
    let mut out = vec![0.0; map.num_coarse()];
    for (x, &p) in fine_pi.probabilities.iter().enumerate() {
        out[map.coarse_of(x)] += p;
    }
    Ok(Distribution::new(out))
}

/// Largest `max − min` of the fine stationary probabilities within a fiber.
pub fn fiber_spread(fine_pi: &Distribution, map: &LiftingMap) -> f64 {
    map.fibers()
        .iter()
        .map(|fiber| {
            let (lo, hi) = fiber.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(fine_pi.get(x)), hi.max(fine_pi.get(x)))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

pub fn check_fiber_symmetry(fine: &Chain, map: &LiftingMap, tol: f64) -> Result<(bool, f64)> {
    if fine.num_states() != map.num_fine() {
        return Err(Error::DimensionMismatch { expected: map.num_fine(), actual: fine.num_states() });
    }
    let pi = stationary(fine, SOLVE_TOLERANCE)?;
    let spread = fiber_spread(&pi, map);
    Ok((spread < tol, spread))
}

/// Max over coarse edges of `|Q_ij − Σ_{x ∈ f⁻¹(i), y ∈ f⁻¹(j)} Q′_xy|`,
/// taken over the union of both supports.
pub fn flow_residual(
    fine: &Chain,
    fine_pi: &Distribution,
    coarse: &Chain,
    coarse_pi: &Distribution,
    map: &LiftingMap,
) -> Result<f64> {
    let mut diff: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (x, y, q) in ergodic_flow(fine, fine_pi)?.flows {
        *diff.entry((map.coarse_of(x), map.coarse_of(y))).or_default() += q;
    }
    for (i, j, q) in ergodic_flow(coarse, coarse_pi)?.flows {
        *diff.entry((i, j)).or_default() -= q;
    }
    Ok(diff.values().map(|d| d.abs()).fold(0.0, f64::max))
}

pub fn verify_lifting(fine: &Chain, coarse: &Chain, map: &LiftingMap, tol: f64) -> Result<LiftingReport> {
    map.check_dims(fine, coarse)?;
    let fine_pi = stationary(fine, SOLVE_TOLERANCE)?;
    let coarse_pi = stationary(coarse, SOLVE_TOLERANCE)?;
    let max_flow_residual = flow_residual(fine, &fine_pi, coarse, &coarse_pi, map)?;
    let aggregated = aggregate_distribution(&fine_pi, map)?;
    let max_aggregation_residual = aggregated
        .probabilities
        .iter()
        .zip(&coarse_pi.probabilities)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let max_fiber_spread = fiber_spread(&fine_pi, map);
    Ok(LiftingReport {
        flow_homomorphism_ok: max_flow_residual < tol,
        max_flow_residual,
        aggregation_ok: max_aggregation_residual < tol,
        max_aggregation_residual,
        fiber_symmetry_ok: max_fiber_spread < tol,
        max_fiber_spread,
        tolerance: tol,
    })
}

/// Result of an exact lumpability check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LumpabilityReport {
    /// `(fine state, coarse target)` pairs whose aggregated probability
    /// differs from the coarse chain's transition.
    pub mismatches: Vec<(usize, usize)>,
}

impl LumpabilityReport {
    pub fn is_exact(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Exact rational check that for every fine `x` and coarse `J`,
/// `Σ_{y ∈ f⁻¹(J)} p′_xy = p_{f(x),J}`. This is stronger than the flow
/// condition: it says the coarse chain is the exact aggregation of the fine one.
pub fn check_lumpability(fine: &Chain, coarse: &Chain, map: &LiftingMap) -> Result<LumpabilityReport> {
    map.check_dims(fine, coarse)?;
    let mut mismatches = Vec::new();
    for (x, row) in fine.rows() {
        let mut sums: BTreeMap<usize, Ratio<i128>> = BTreeMap::new();
        for t in row {
            let p = Ratio::new(*t.prob.numer() as i128, *t.prob.denom() as i128);
            *sums.entry(map.coarse_of(t.to)).or_insert_with(Ratio::zero) += p;
        }
        let i = map.coarse_of(x);
        for t in coarse.row(i) {
            sums.entry(t.to).or_insert_with(Ratio::zero);
        }
        for (j, s) in sums {
            let expected = coarse.prob(i, j);
            if s != Ratio::new(*expected.numer() as i128, *expected.denom() as i128) {
                mismatches.push((x, j));
            }
        }
    }
    Ok(LumpabilityReport { mismatches })
}
