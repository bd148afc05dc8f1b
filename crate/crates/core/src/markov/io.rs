//! JSON and DOT encodings of [`Chain`].
//!
//! The JSON document lists every transition as a `(from, to, numerator,
//! denominator)` record so rational probabilities survive a round trip exactly.
//! Event edges carry their own event mass, normally equal to the edge probability.

use std::fmt::Write as _;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::chain::{Chain, ChainBuilder, Prob};
use crate::error::{Error, Result};

/// Largest chain accepted by [`to_dot`].
pub const DOT_LIMIT: usize = 200;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalEdge {
    pub from: usize,
    pub to: usize,
    pub num: i64,
    pub den: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainDocument {
    pub num_states: usize,
    pub labels: Vec<String>,
    pub transitions: Vec<RationalEdge>,
    #[serde(default)]
    pub event_edges: Vec<RationalEdge>,
}

impl From<&Chain> for ChainDocument {
    fn from(chain: &Chain) -> Self {
        let mut transitions = Vec::with_capacity(chain.num_transitions());
        let mut event_edges = Vec::new();
        for (from, row) in chain.rows() {
            for t in row {
                transitions.push(edge(from, t.to, &t.prob));
                if !t.event.is_zero() {
                    event_edges.push(edge(from, t.to, &t.event));
                }
            }
        }
        Self { num_states: chain.num_states(), labels: chain.labels().to_vec(), transitions, event_edges }
    }
}

fn edge(from: usize, to: usize, p: &Prob) -> RationalEdge {
    RationalEdge { from, to, num: *p.numer(), den: *p.denom() }
}

fn ratio(e: &RationalEdge) -> Result<Prob> {
    if e.den == 0 {
        return Err(Error::InvalidChain(format!("zero denominator on edge ({}, {})", e.from, e.to)));
    }
    Ok(Prob::new(e.num, e.den))
}

impl TryFrom<ChainDocument> for Chain {
    type Error = Error;

    fn try_from(doc: ChainDocument) -> Result<Chain> {
        let labels = if doc.labels.is_empty() {
            (0..doc.num_states).map(|i| i.to_string()).collect()
        } else if doc.labels.len() == doc.num_states {
            doc.labels
        } else {
            return Err(Error::DimensionMismatch { expected: doc.num_states, actual: doc.labels.len() });
        };
        let mut builder = ChainBuilder::new(labels);
        let n = doc.num_states;
        let check = |e: &RationalEdge| {
            if e.from >= n {
                Err(Error::StateOutOfRange(e.from))
            } else if e.to >= n {
                Err(Error::StateOutOfRange(e.to))
            } else {
                Ok(())
            }
        };
        for e in &doc.transitions {
            check(e)?;
            builder.add(e.from, e.to, ratio(e)?);
        }
        for e in &doc.event_edges {
            check(e)?;
            builder.add_marked(e.from, e.to, Prob::zero(), ratio(e)?);
        }
        let chain = builder.build()?;
        for e in &doc.event_edges {
            if chain.prob(e.from, e.to).is_zero() {
                return Err(Error::InvalidChain(format!(
                    "event edge ({}, {}) not in transition support",
                    e.from, e.to
                )));
            }
        }
        Ok(chain)
    }
}

pub fn to_json(chain: &Chain) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ChainDocument::from(chain))?)
}

pub fn from_json(text: &str) -> Result<Chain> {
    let doc: ChainDocument = serde_json::from_str(text)?;
    Chain::try_from(doc)
}

/// Graphviz rendering; event edges are drawn bold red.
pub fn to_dot(chain: &Chain) -> Result<String> {
    if chain.num_states() > DOT_LIMIT {
        return Err(Error::OutOfRange(format!(
            "DOT export supports at most {DOT_LIMIT} states, chain has {}",
            chain.num_states()
        )));
    }
    let mut out = String::from("digraph chain {\n  rankdir=LR;\n");
    for (i, label) in chain.labels().iter().enumerate() {
        let _ = writeln!(out, "  s{i} [label=\"{}\"];", label.replace('"', "\\\""));
    }
    for (from, row) in chain.rows() {
        for t in row {
            let style = if t.event.is_zero() { "" } else { ", color=red, style=bold" };
            let _ = writeln!(out, "  s{from} -> s{} [label=\"{}\"{style}];", t.to, t.prob);
        }
    }
    out.push_str("}\n");
    Ok(out)
}
