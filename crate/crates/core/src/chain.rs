//! Conversion of a candidate subgraph into a Markov chain.
//!
//! Every edge `(v_i, v_j)` of the graph becomes a transition from state
//! `s_j` back to state `s_i`: a state points at its possible activators.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::candidates::strongly_connected_components;
use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Naive,
    SelfLoops,
    NoLoops,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Naive => "naive",
            Scheme::SelfLoops => "self_loops",
            Scheme::NoLoops => "no_loops",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scheme-specific data kept for score restoration.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainAux {
    None,
    MaxIn(f64),
    InDegrees(Vec<f64>),
}

/// A row-stochastic transition matrix stored by rows.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    /// `rows[j]` lists `(i, q_ji)` with `q_ji > 0`, ascending in `i`.
    rows: Vec<Vec<(usize, f64)>>,
    pub scheme: Scheme,
    pub aux: ChainAux,
}

impl MarkovChain {
    /// Builds a chain from explicit rows; rows must be stochastic.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, scheme: Scheme, aux: ChainAux) -> Result<Self> {
        let n = rows.len();
        for (j, row) in rows.iter().enumerate() {
            let mut sum = 0.0;
            for &(i, q) in row {
                if i >= n || !(0.0..=1.0).contains(&q) {
                    return Err(Error::InvalidParameter(format!(
                        "bad transition {j} -> {i}: {q}"
                    )));
                }
                sum += q;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("row {j} sums to {sum}")));
            }
        }
        let rows = rows
            .into_iter()
            .map(|mut r| {
                r.retain(|&(_, q)| q > 0.0);
                r.sort_by_key(|&(i, _)| i);
                r
            })
            .collect();
        Ok(MarkovChain { rows, scheme, aux })
    }

    pub fn state_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, state: usize) -> &[(usize, f64)] {
        &self.rows[state]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        let row = &self.rows[from];
        row.binary_search_by_key(&to, |&(i, _)| i)
            .map(|k| row[k].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.state_count();
        let mut m = vec![vec![0.0; n]; n];
        for (j, row) in self.rows.iter().enumerate() {
            for &(i, q) in row {
                m[j][i] = q;
            }
        }
        m
    }

    /// Transitions as `(from, to, q)`, self loops included.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(j, row)| row.iter().map(move |&(i, q)| (j, i, q)))
    }

    /// Whether the chain's transition digraph is strongly connected.
    pub fn is_irreducible(&self) -> bool {
        let n = self.state_count();
        n <= 1
            || strongly_connected_components(n, |j| self.rows[j].iter().map(|&(i, _)| i).collect())
                .0
                .len()
                == 1
    }

    /// Coordinate dump: a header, `n n nnz`, then one 1-based `i j q` line
    /// per nonzero transition.
    pub fn to_matrix_market(&self) -> String {
        let n = self.state_count();
        let nnz: usize = self.rows.iter().map(Vec::len).sum();
        let mut out = String::new();
        let _ = writeln!(out, "%%MatrixMarket matrix coordinate real general");
        let _ = writeln!(out, "% scheme: {}", self.scheme);
        let _ = writeln!(out, "{n} {n} {nnz}");
        for (j, i, q) in self.transitions() {
            let _ = writeln!(out, "{} {} {}", j + 1, i + 1, q);
        }
        out
    }
}

fn in_degrees_positive(g: &WeightedDigraph) -> Result<Vec<f64>> {
    let w_in = g.weighted_in_degrees();
    match w_in.iter().position(|&w| w <= 0.0) {
        Some(node) => Err(Error::ZeroInDegree { node }),
        None => Ok(w_in),
    }
}

fn normalized_reverse(g: &WeightedDigraph, denom: impl Fn(usize) -> f64) -> Vec<Vec<(usize, f64)>> {
    (0..g.node_count())
        .map(|j| {
            let d = denom(j);
            g.in_edges(j).map(|e| (e.src, e.p / d)).collect()
        })
        .collect()
}

/// `q_ji = p_ij / w_in(v_j)`.
pub fn convert_naive(g: &WeightedDigraph) -> Result<MarkovChain> {
    let w_in = in_degrees_positive(g)?;
    let rows = normalized_reverse(g, |j| w_in[j]);
    Ok(MarkovChain {
        rows,
        scheme: Scheme::Naive,
        aux: ChainAux::None,
    })
}

/// `q_ji = p_ij / max_in` plus a self loop `(max_in - w_in(v_i)) / max_in`.
pub fn convert_self_loops(g: &WeightedDigraph) -> Result<MarkovChain> {
    let w_in = in_degrees_positive(g)?;
    let max_in = w_in.iter().copied().fold(0.0, f64::max);
    let mut rows = normalized_reverse(g, |_| max_in);
    for (i, row) in rows.iter_mut().enumerate() {
        let stay = (max_in - w_in[i]) / max_in;
        if stay > 0.0 {
            let at = row.partition_point(|&(k, _)| k < i);
            row.insert(at, (i, stay));
        }
    }
    Ok(MarkovChain {
        rows,
        scheme: Scheme::SelfLoops,
        aux: ChainAux::MaxIn(max_in),
    })
}

/// Same matrix as [`convert_naive`], keeping `w_in` for the correction step.
pub fn convert_no_loops(g: &WeightedDigraph) -> Result<MarkovChain> {
    let w_in = in_degrees_positive(g)?;
    let rows = normalized_reverse(g, |j| w_in[j]);
    Ok(MarkovChain {
        rows,
        scheme: Scheme::NoLoops,
        aux: ChainAux::InDegrees(w_in),
    })
}

pub fn convert(g: &WeightedDigraph, scheme: Scheme) -> Result<MarkovChain> {
    match scheme {
        Scheme::Naive => convert_naive(g),
        Scheme::SelfLoops => convert_self_loops(g),
        Scheme::NoLoops => convert_no_loops(g),
    }
}
