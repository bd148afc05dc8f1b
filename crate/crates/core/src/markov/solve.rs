use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::chain::{to_f64, Chain};
use crate::error::{Error, Result};

/// Chains up to this size are solved with a dense LU factorization.
pub const DENSE_LIMIT: usize = 2000;
/// Iteration cap for the damped fixed-point solver.
pub const MAX_ITERATIONS: u64 = 10_000_000;

/// A probability vector over the states of a chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub probabilities: Vec<f64>,
}

impl Distribution {
    pub fn new(probabilities: Vec<f64>) -> Self {
        Self { probabilities }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn get(&self, state: usize) -> f64 {
        self.probabilities[state]
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// `‖πP − π‖∞`
    pub fn residual(&self, chain: &Chain) -> f64 {
        let sparse = chain.sparse();
        let mut next = vec![0.0; self.len()];
        sparse.left_mul(&self.probabilities, &mut next);
        max_abs_diff(&next, &self.probabilities)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn require_irreducible(chain: &Chain) -> Result<()> {
    chain.ensure_valid()?;
    if chain.num_states() > 1 && !chain.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    Ok(())
}

/// Stationary distribution of an irreducible chain with `‖πP − π‖∞ < tolerance`.
///
/// Periodic chains are accepted: irreducibility alone fixes π uniquely, and the
/// iterative path runs on the lazy chain `(P + I)/2`, which has the same π.
pub fn stationary(chain: &Chain, tolerance: f64) -> Result<Distribution> {
    require_irreducible(chain)?;
    let n = chain.num_states();
    if n == 1 {
        return Ok(Distribution::new(vec![1.0]));
    }
    let start = if n <= DENSE_LIMIT {
        let pi = dense_stationary(chain);
        if let Some(pi) = pi {
            if pi.residual(chain) < tolerance {
                return Ok(pi);
            }
            pi.probabilities
        } else {
            vec![1.0 / n as f64; n]
        }
    } else {
        vec![1.0 / n as f64; n]
    };
    damped_iteration(chain, start, tolerance)
}

fn dense_stationary(chain: &Chain) -> Option<Distribution> {
    let n = chain.num_states();
    // (Pᵀ − I) π = 0 with the last balance equation replaced by Σπ = 1.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (i, row) in chain.rows() {
        for t in row {
            a[(t.to, i)] += to_f64(&t.prob);
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b)?;
    let mut probs: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|v| *v /= total);
    Some(Distribution::new(probs))
}

fn damped_iteration(chain: &Chain, mut x: Vec<f64>, tolerance: f64) -> Result<Distribution> {
    let sparse = chain.sparse();
    let mut next = vec![0.0; x.len()];
    let mut residual = f64::INFINITY;
    for iteration in 0..MAX_ITERATIONS {
        sparse.left_mul(&x, &mut next);
        residual = max_abs_diff(&next, &x);
        if residual < tolerance {
            return Ok(Distribution::new(x));
        }
        for (xi, &yi) in x.iter_mut().zip(&next) {
            *xi = 0.5 * (*xi + yi);
        }
        if iteration % 1024 == 0 {
            let total: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= total);
        }
    }
    Err(Error::NoConvergence { iterations: MAX_ITERATIONS, residual })
}

/// Expected return time `h_jj = 1/π_j`.
pub fn expected_return_time(chain: &Chain, state: usize) -> Result<f64> {
    if state >= chain.num_states() {
        return Err(Error::StateOutOfRange(state));
    }
    let pi = stationary(chain, 1e-13)?;
    Ok(1.0 / pi.get(state))
}

/// Expected number of steps to reach `to` starting from `from`, counting at
/// least one step (so `from == to` gives the expected return time).
pub fn expected_hitting_time(chain: &Chain, from: usize, to: usize) -> Result<f64> {
    chain.ensure_valid()?;
    let n = chain.num_states();
    for s in [from, to] {
        if s >= n {
            return Err(Error::StateOutOfRange(s));
        }
    }
    // Every state visited before absorption must still be able to reach `to`.
    let reach = chain.reachable_from(from);
    let back = chain.can_reach(to);
    if (0..n).any(|s| reach[s] && !back[s]) {
        return Err(Error::InfiniteHittingTime { from, to });
    }
    // Unknowns: reachable states other than `to`.
    let unknowns: Vec<usize> = (0..n).filter(|&s| reach[s] && s != to).collect();
    let mut slot = vec![usize::MAX; n];
    for (k, &s) in unknowns.iter().enumerate() {
        slot[s] = k;
    }
    let h = if unknowns.is_empty() {
        Vec::new()
    } else if unknowns.len() <= DENSE_LIMIT {
        dense_hitting(chain, &unknowns, &slot)
            .ok_or(Error::InfiniteHittingTime { from, to })?
    } else {
        iterative_hitting(chain, &unknowns, &slot)?
    };
    let value_at = |s: usize| if s == to { 0.0 } else { h[slot[s]] };
    if from == to {
        Ok(1.0 + chain.row(to).iter().map(|t| to_f64(&t.prob) * value_at(t.to)).sum::<f64>())
    } else {
        Ok(value_at(from))
    }
}

fn dense_hitting(chain: &Chain, unknowns: &[usize], slot: &[usize]) -> Option<Vec<f64>> {
    let m = unknowns.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    let b = DVector::<f64>::from_element(m, 1.0);
    for (k, &s) in unknowns.iter().enumerate() {
        for t in chain.row(s) {
            if slot[t.to] != usize::MAX {
                a[(k, slot[t.to])] -= to_f64(&t.prob);
            }
        }
    }
    a.lu().solve(&b).map(|x| x.iter().copied().collect())
}

fn iterative_hitting(chain: &Chain, unknowns: &[usize], slot: &[usize]) -> Result<Vec<f64>> {
    // Gauss-Seidel on h = 1 + P_restricted h; converges for a transient restriction.
    let mut h = vec![0.0; unknowns.len()];
    let mut change = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        change = 0.0;
        for (k, &s) in unknowns.iter().enumerate() {
            let mut v = 1.0;
            for t in chain.row(s) {
                if slot[t.to] != usize::MAX {
                    v += to_f64(&t.prob) * h[slot[t.to]];
                }
            }
            change = f64::max(change, (v - h[k]).abs() / v.max(1.0));
            h[k] = v;
        }
        if change < 1e-14 {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence { iterations: MAX_ITERATIONS, residual: change })
}

/// Ergodic flows `Q_ij = π_i p_ij`, stored edge by edge in row order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowMatrix {
    pub num_states: usize,
    pub flows: Vec<(usize, usize, f64)>,
}

impl FlowMatrix {
    pub fn total(&self) -> f64 {
        self.flows.iter().map(|f| f.2).sum()
    }

    pub fn outflows(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_states];
        for &(i, _, q) in &self.flows {
            out[i] += q;
        }
        out
    }

    pub fn inflows(&self) -> Vec<f64> {
        let mut inflow = vec![0.0; self.num_states];
        for &(_, j, q) in &self.flows {
            inflow[j] += q;
        }
        inflow
    }

    /// Largest per-state `|inflow − outflow|`.
    pub fn max_imbalance(&self) -> f64 {
        max_abs_diff(&self.inflows(), &self.outflows())
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.flows
            .iter()
            .find(|f| f.0 == from && f.1 == to)
            .map_or(0.0, |f| f.2)
    }
}

pub fn ergodic_flow(chain: &Chain, pi: &Distribution) -> Result<FlowMatrix> {
    if pi.len() != chain.num_states() {
        return Err(Error::DimensionMismatch { expected: chain.num_states(), actual: pi.len() });
    }
    let flows = chain
        .rows()
        .flat_map(|(i, row)| row.iter().map(move |t| (i, t.to, pi.get(i) * to_f64(&t.prob))))
        .collect();
    Ok(FlowMatrix { num_states: chain.num_states(), flows })
}

/// Stationary event rate and its reciprocal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRate {
    /// Probability that a stationary step traverses an event edge.
    pub mu: f64,
    /// Expected steps between events, `1/mu`.
    pub latency: f64,
}

pub fn event_rate(chain: &Chain, pi: &Distribution) -> Result<EventRate> {
    if pi.len() != chain.num_states() {
        return Err(Error::DimensionMismatch { expected: chain.num_states(), actual: pi.len() });
    }
    if !chain.has_events() {
        return Err(Error::NoEvents);
    }
    let mu: f64 = chain
        .event_edges()
        .iter()
        .map(|(i, _, mass)| pi.get(*i) * to_f64(mass))
        .sum();
    Ok(EventRate { mu, latency: 1.0 / mu })
}

/// Convenience: solve π and return the event rate.
pub fn solve_event_rate(chain: &Chain) -> Result<EventRate> {
    let pi = stationary(chain, 1e-13)?;
    event_rate(chain, &pi)
}

/// Walks the chain for `steps` transitions from `start` and returns the mean
/// number of steps between event traversals (`None` if fewer than two events).
pub fn empirical_event_gap<R: Rng>(chain: &Chain, start: usize, steps: u64, rng: &mut R) -> Option<f64> {
    let sparse = chain.sparse();
    let event_share: Vec<Vec<f64>> = chain
        .rows()
        .map(|(_, row)| row.iter().map(|t| to_f64(&t.event) / to_f64(&t.prob)).collect())
        .collect();
    let mut state = start;
    let mut first = None;
    let mut last = 0u64;
    let mut count = 0u64;
    for step in 0..steps {
        let u: f64 = rng.gen();
        let lo = sparse.offsets[state];
        let hi = sparse.offsets[state + 1];
        let mut acc = 0.0;
        let mut pick = hi - 1;
        for k in lo..hi {
            acc += sparse.vals[k];
            if u < acc {
                pick = k;
                break;
            }
        }
        let share = event_share[state][pick - lo];
        if share > 0.0 && (share >= 1.0 || rng.gen::<f64>() < share) {
            first.get_or_insert(step);
            last = step;
            count += 1;
        }
        state = sparse.cols[pick];
    }
    let first = first?;
    (count >= 2).then(|| (last - first) as f64 / (count - 1) as f64)
}
