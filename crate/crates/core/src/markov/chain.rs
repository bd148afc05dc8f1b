use std::collections::{BTreeMap, VecDeque};

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact transition probability. Builders only ever produce `k/n`.
pub type Prob = Ratio<i64>;

/// One outgoing transition of a state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub to: usize,
    pub prob: Prob,
    /// Part of `prob` that counts as a completion event. Zero for unmarked edges.
    pub event: Prob,
}

/// A finite, labeled Markov chain with exact rational transitions and
/// optional completion-event marks on edges.
///
/// States are dense indices `0..num_states()`; labels are only for display
/// and serialization. Rows are kept sorted by target with duplicates merged.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chain {
    labels: Vec<String>,
    rows: Vec<Vec<Transition>>,
}

/// Incremental constructor for [`Chain`]. Repeated `(from, to)` pairs are summed.
#[derive(Debug)]
pub struct ChainBuilder {
    labels: Vec<String>,
    rows: Vec<BTreeMap<usize, (Prob, Prob)>>,
}

impl ChainBuilder {
    pub fn new(labels: Vec<String>) -> Self {
        let rows = vec![BTreeMap::new(); labels.len()];
        Self { labels, rows }
    }

    pub fn with_states(num_states: usize) -> Self {
        Self::new((0..num_states).map(|i| i.to_string()).collect())
    }

    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    /// Adds an unmarked transition.
    pub fn add(&mut self, from: usize, to: usize, prob: Prob) -> &mut Self {
        self.add_marked(from, to, prob, Prob::zero())
    }

    /// Adds a transition whose whole probability is a completion event.
    pub fn add_event(&mut self, from: usize, to: usize, prob: Prob) -> &mut Self {
        self.add_marked(from, to, prob, prob)
    }

    pub fn add_marked(&mut self, from: usize, to: usize, prob: Prob, event: Prob) -> &mut Self {
        let slot = self.rows[from].entry(to).or_insert((Prob::zero(), Prob::zero()));
        slot.0 += prob;
        slot.1 += event;
        self
    }

    pub fn build(self) -> Result<Chain> {
        let n = self.labels.len();
        if n == 0 {
            return Err(Error::InvalidChain("chain has no states".into()));
        }
        let mut rows = Vec::with_capacity(n);
        for row in self.rows {
            let mut out = Vec::with_capacity(row.len());
            for (to, (prob, event)) in row {
                if to >= n {
                    return Err(Error::StateOutOfRange(to));
                }
                if prob.is_zero() && event.is_zero() {
                    continue;
                }
                out.push(Transition { to, prob, event });
            }
            rows.push(out);
        }
        Ok(Chain { labels: self.labels, rows })
    }
}

/// Findings of [`Chain::validate`]. An empty report means the chain is valid.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct ValidationReport {
    /// `(state, row sum)` for every row that does not sum to exactly 1.
    pub row_sum_violations: Vec<(usize, f64)>,
    /// `(from, to, probability)` for probabilities outside `[0, 1]`.
    pub out_of_range: Vec<(usize, usize, f64)>,
    /// `(from, to)` where the event mass is negative or exceeds the edge probability.
    pub bad_event_marks: Vec<(usize, usize)>,
    /// States not reachable from state 0.
    pub unreachable: Vec<usize>,
}

impl ValidationReport {
    /// Unreachable states are reported but do not make the chain malformed.
    pub fn is_valid(&self) -> bool {
        self.row_sum_violations.is_empty()
            && self.out_of_range.is_empty()
            && self.bad_event_marks.is_empty()
    }
}

/// Row-major sparse matrix in `f64`, the form every solver works on.
#[derive(Clone, Debug)]
pub struct SparseRows {
    pub offsets: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseRows {
    pub fn num_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        self.cols[lo..hi].iter().copied().zip(self.vals[lo..hi].iter().copied())
    }

    /// `x P`
    pub fn left_mul(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, p) in self.row(i) {
                out[j] += xi * p;
            }
        }
    }
}

pub fn to_f64(p: &Prob) -> f64 {
    p.to_f64().unwrap_or(f64::NAN)
}

impl Chain {
    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn row(&self, state: usize) -> &[Transition] {
        &self.rows[state]
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &[Transition])> {
        self.rows.iter().enumerate().map(|(i, r)| (i, r.as_slice()))
    }

    pub fn prob(&self, from: usize, to: usize) -> Prob {
        self.rows[from]
            .binary_search_by_key(&to, |t| t.to)
            .map(|k| self.rows[from][k].prob)
            .unwrap_or_else(|_| Prob::zero())
    }

    pub fn num_transitions(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// All `(from, to, event mass)` with non-zero event mass.
    pub fn event_edges(&self) -> Vec<(usize, usize, Prob)> {
        self.rows()
            .flat_map(|(i, row)| {
                row.iter()
                    .filter(|t| !t.event.is_zero())
                    .map(move |t| (i, t.to, t.event))
            })
            .collect()
    }

    pub fn has_events(&self) -> bool {
        self.rows.iter().flatten().any(|t| !t.event.is_zero())
    }

    /// Returns a copy whose event marks are replaced: each listed edge becomes a
    /// fully marked event, every other edge is unmarked.
    pub fn with_event_edges(&self, edges: &[(usize, usize)]) -> Result<Chain> {
        let mut rows = self.rows.clone();
        rows.iter_mut().flatten().for_each(|t| t.event = Prob::zero());
        for &(i, j) in edges {
            let row = rows.get_mut(i).ok_or(Error::StateOutOfRange(i))?;
            let t = row
                .iter_mut()
                .find(|t| t.to == j)
                .ok_or_else(|| Error::InvalidChain(format!("event edge ({i}, {j}) not in support")))?;
            t.event = t.prob;
        }
        Ok(Chain { labels: self.labels.clone(), rows })
    }

    pub fn sparse(&self) -> SparseRows {
        let mut offsets = Vec::with_capacity(self.rows.len() + 1);
        let mut cols = Vec::with_capacity(self.num_transitions());
        let mut vals = Vec::with_capacity(self.num_transitions());
        offsets.push(0);
        for row in &self.rows {
            for t in row {
                cols.push(t.to);
                vals.push(to_f64(&t.prob));
            }
            offsets.push(cols.len());
        }
        SparseRows { offsets, cols, vals }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for (i, row) in self.rows() {
            // i128 accumulation keeps sums of k/n exact for any realistic denominator.
            let mut sum = Ratio::<i128>::zero();
            for t in row {
                let p = Ratio::new(*t.prob.numer() as i128, *t.prob.denom() as i128);
                sum += p;
                if t.prob.is_negative() || t.prob > Prob::one() {
                    report.out_of_range.push((i, t.to, to_f64(&t.prob)));
                }
                if t.event.is_negative() || t.event > t.prob {
                    report.bad_event_marks.push((i, t.to));
                }
            }
            if !sum.is_one() {
                let s = *sum.numer() as f64 / *sum.denom() as f64;
                report.row_sum_violations.push((i, s));
            }
        }
        let seen = self.reachable_from(0);
        report.unreachable = (0..self.num_states()).filter(|&s| !seen[s]).collect();
        report
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidChain(format!(
                "{} row-sum violations, {} out-of-range probabilities, {} bad event marks",
                report.row_sum_violations.len(),
                report.out_of_range.len(),
                report.bad_event_marks.len()
            )))
        }
    }

    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(x) = queue.pop_front() {
            for t in &self.rows[x] {
                if !seen[t.to] {
                    seen[t.to] = true;
                    queue.push_back(t.to);
                }
            }
        }
        seen
    }

    /// States from which `target` is reachable (including `target` itself).
    pub fn can_reach(&self, target: usize) -> Vec<bool> {
        let n = self.num_states();
        let mut reverse = vec![Vec::new(); n];
        for (i, row) in self.rows() {
            for t in row {
                reverse[t.to].push(i);
            }
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([target]);
        seen[target] = true;
        while let Some(x) = queue.pop_front() {
            for &y in &reverse[x] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen
    }

    pub fn is_irreducible(&self) -> bool {
        self.reachable_from(0).iter().all(|&b| b) && self.can_reach(0).iter().all(|&b| b)
    }

    /// Period of an irreducible chain: gcd of `level(u) + 1 - level(v)` over all
    /// edges, with BFS levels from state 0. `None` for reducible chains.
    pub fn period(&self) -> Option<u64> {
        if !self.is_irreducible() {
            return None;
        }
        let n = self.num_states();
        let mut level = vec![u64::MAX; n];
        level[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(x) = queue.pop_front() {
            for t in &self.rows[x] {
                if level[t.to] == u64::MAX {
                    level[t.to] = level[x] + 1;
                    queue.push_back(t.to);
                }
            }
        }
        let mut g = 0u64;
        for (i, row) in self.rows() {
            for t in row {
                let diff = (level[i] + 1).abs_diff(level[t.to]);
                g = gcd(g, diff);
            }
        }
        Some(g.max(1))
    }

    /// Irreducible and aperiodic. A single state is ergodic by convention.
    pub fn is_ergodic(&self) -> Result<bool> {
        self.ensure_valid()?;
        if self.num_states() == 1 {
            return Ok(true);
        }
        Ok(self.period() == Some(1))
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: i64, d: i64) -> Prob {
        Prob::new(n, d)
    }

    fn self_loop() -> Chain {
        let mut b = ChainBuilder::with_states(1);
        b.add(0, 0, p(1, 1));
        b.build().unwrap()
    }

    #[test]
    fn single_state_is_valid_and_ergodic() {
        let c = self_loop();
        assert!(c.validate().is_valid());
        assert!(c.is_ergodic().unwrap());
    }

    #[test]
    fn short_row_is_reported() {
        let mut b = ChainBuilder::with_states(2);
        b.add(0, 1, p(9, 10)).add(1, 0, p(1, 1));
        let report = b.build().unwrap().validate();
        assert_eq!(report.row_sum_violations.len(), 1);
        assert_eq!(report.row_sum_violations[0].0, 0);
        assert!((report.row_sum_violations[0].1 - 0.9).abs() < 1e-15);
        assert!(!report.is_valid());
    }

    #[test]
    fn two_cycle_has_period_two() {
        let mut b = ChainBuilder::with_states(2);
        b.add(0, 1, p(1, 1)).add(1, 0, p(1, 1));
        let c = b.build().unwrap();
        assert!(c.is_irreducible());
        assert_eq!(c.period(), Some(2));
        assert!(!c.is_ergodic().unwrap());
    }

    #[test]
    fn ergodicity_rejects_invalid_chain() {
        let mut b = ChainBuilder::with_states(2);
        b.add(0, 1, p(1, 2)).add(1, 0, p(1, 1));
        assert!(b.build().unwrap().is_ergodic().is_err());
    }

    #[test]
    fn unreachable_states_are_listed() {
        let mut b = ChainBuilder::with_states(3);
        b.add(0, 0, p(1, 1)).add(1, 0, p(1, 1)).add(2, 2, p(1, 1));
        let c = b.build().unwrap();
        assert_eq!(c.validate().unreachable, vec![1, 2]);
        assert!(!c.is_irreducible());
        assert_eq!(c.period(), None);
    }

    #[test]
    fn duplicate_edges_merge() {
        let mut b = ChainBuilder::with_states(1);
        b.add(0, 0, p(1, 2)).add_event(0, 0, p(1, 2));
        let c = b.build().unwrap();
        assert_eq!(c.row(0).len(), 1);
        assert_eq!(c.row(0)[0].prob, p(1, 1));
        assert_eq!(c.row(0)[0].event, p(1, 2));
    }

    #[test]
    fn event_edges_must_be_in_support() {
        let c = self_loop();
        assert!(c.with_event_edges(&[(0, 0)]).unwrap().has_events());
        assert!(c.with_event_edges(&[(0, 1)]).is_err());
    }
}
