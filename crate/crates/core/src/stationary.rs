//! Stationary distributions and the candidate scores restored from them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainAux, MarkovChain, Scheme};
use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, Lu};
use crate::seed;

/// Largest chain solved with a dense LU; bigger chains use the sparse
/// iterative solver.
pub const DENSE_LIMIT: usize = 4096;

const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Direct,
    RandomWalk { steps: u64, walks: u32 },
}

/// A probability vector over chain states.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub values: Vec<f64>,
    pub method: EstimateMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    #[default]
    Auto,
    DenseLu,
    SparseIterative,
}

/// Solves `pi Q = pi`, `sum(pi) = 1` exactly (up to rounding).
pub fn stationary_direct(mc: &MarkovChain) -> Result<Distribution> {
    stationary_direct_with(mc, Solver::Auto)
}

pub fn stationary_direct_with(mc: &MarkovChain, solver: Solver) -> Result<Distribution> {
    if !mc.is_irreducible() {
        return Err(Error::ReducibleChain);
    }
    let n = mc.state_count();
    if n == 0 {
        return Err(Error::InvalidParameter("empty chain".into()));
    }
    let dense = match solver {
        Solver::Auto => n <= DENSE_LIMIT,
        Solver::DenseLu => true,
        Solver::SparseIterative => false,
    };
    let raw = if dense {
        solve_dense(mc)?
    } else {
        solve_iterative(mc)?
    };
    let values = clean_probabilities(raw)?;
    let residual = residual(mc, &values);
    if residual > RESIDUAL_TOL.max(n as f64 * 1e-15) {
        return Err(Error::Numerical(format!(
            "stationary residual {residual:e} above tolerance"
        )));
    }
    Ok(Distribution {
        values,
        method: EstimateMethod::Direct,
    })
}

/// Max-norm of `pi Q - pi`.
fn residual(mc: &MarkovChain, pi: &[f64]) -> f64 {
    let next = step(mc, pi);
    next.iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn step(mc: &MarkovChain, pi: &[f64]) -> Vec<f64> {
    let mut next = vec![0.0; pi.len()];
    for (j, row) in mc.rows().iter().enumerate() {
        let mass = pi[j];
        for &(i, q) in row {
            next[i] += mass * q;
        }
    }
    next
}

fn solve_dense(mc: &MarkovChain) -> Result<Vec<f64>> {
    let n = mc.state_count();
    // (Q^T - I) pi = 0, last equation replaced by sum(pi) = 1.
    let mut a = vec![0.0; n * n];
    for (j, i, q) in mc.transitions() {
        a[i * n + j] += q;
    }
    for i in 0..n {
        a[i * n + i] -= 1.0;
    }
    for c in 0..n {
        a[(n - 1) * n + c] = 1.0;
    }
    let lu = Lu::factor(n, a.clone());
    if lu.is_singular() {
        return Err(Error::Numerical("stationary system is singular".into()));
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let mut x = lu.solve(&b)?;
    // One step of iterative refinement.
    let r: Vec<f64> = (0..n)
        .map(|row| b[row] - compensated_sum((0..n).map(|c| a[row * n + c] * x[c])))
        .collect();
    let dx = lu.solve(&r)?;
    for (xi, d) in x.iter_mut().zip(dx) {
        *xi += d;
    }
    Ok(x)
}

/// Power iteration on the lazy chain `(I + Q) / 2`, which shares the
/// stationary distribution and is aperiodic.
fn solve_iterative(mc: &MarkovChain) -> Result<Vec<f64>> {
    let n = mc.state_count();
    let mut pi = vec![1.0 / n as f64; n];
    const MAX_ITERS: usize = 1_000_000;
    for it in 0..MAX_ITERS {
        let moved = step(mc, &pi);
        let next: Vec<f64> = pi.iter().zip(&moved).map(|(a, b)| 0.5 * (a + b)).collect();
        let total: f64 = compensated_sum(next.iter().copied());
        let next: Vec<f64> = next.into_iter().map(|v| v / total).collect();
        pi = next;
        if it % 16 == 15 && residual(mc, &pi) <= RESIDUAL_TOL * 0.5 {
            return Ok(pi);
        }
    }
    Err(Error::Numerical(format!(
        "sparse stationary solve did not converge in {MAX_ITERS} iterations"
    )))
}

fn clean_probabilities(mut v: Vec<f64>) -> Result<Vec<f64>> {
    for x in v.iter_mut() {
        if !x.is_finite() || *x < -1e-10 {
            return Err(Error::Numerical(format!(
                "stationary entry {x} is not a probability"
            )));
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total = compensated_sum(v.iter().copied());
    if total <= 0.0 {
        return Err(Error::Numerical("stationary vector has zero mass".into()));
    }
    v.iter_mut().for_each(|x| *x /= total);
    Ok(v)
}

/// Cumulative transition rows for sampling walks.
struct WalkTable {
    targets: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
}

impl WalkTable {
    fn new(mc: &MarkovChain) -> Result<Self> {
        let mut targets = Vec::with_capacity(mc.state_count());
        let mut cumulative = Vec::with_capacity(mc.state_count());
        for (j, row) in mc.rows().iter().enumerate() {
            if row.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "state {j} has no outgoing transition"
                )));
            }
            let mut acc = 0.0;
            let cum: Vec<f64> = row
                .iter()
                .map(|&(_, q)| {
                    acc += q;
                    acc
                })
                .collect();
            targets.push(row.iter().map(|&(i, _)| i).collect());
            cumulative.push(cum);
        }
        Ok(WalkTable {
            targets,
            cumulative,
        })
    }

    #[inline]
    fn next(&self, state: usize, u: f64) -> usize {
        let cum = &self.cumulative[state];
        let x = u * cum[cum.len() - 1];
        let k = cum.partition_point(|&c| c <= x).min(cum.len() - 1);
        self.targets[state][k]
    }
}

/// Visit counts of one walk of `steps` transitions from a uniform start;
/// the start state is counted, so the counts sum to `steps + 1`.
pub fn walk_visit_counts(mc: &MarkovChain, steps: u64, seed: u64) -> Result<Vec<u64>> {
    let table = WalkTable::new(mc)?;
    Ok(walk_with_table(&table, mc.state_count(), steps, seed))
}

fn walk_with_table(table: &WalkTable, n: usize, steps: u64, seed: u64) -> Vec<u64> {
    let mut rng = seed::stream(seed);
    let mut counts = vec![0u64; n];
    let mut state = rng.gen_range(0..n);
    counts[state] += 1;
    for _ in 0..steps {
        state = table.next(state, rng.gen::<f64>());
        counts[state] += 1;
    }
    counts
}

/// Long-run visit frequencies of a single random walk.
pub fn stationary_random_walk(mc: &MarkovChain, steps: u64, seed: u64) -> Result<Distribution> {
    stationary_random_walks(mc, steps, 1, seed)
}

/// Sums the visit counts of `walks` independent walks of `steps` each.
///
/// Walk `k` is seeded with `derive(seed, [k])`.
pub fn stationary_random_walks(
    mc: &MarkovChain,
    steps: u64,
    walks: u32,
    seed: u64,
) -> Result<Distribution> {
    if steps == 0 {
        return Err(Error::InvalidParameter(
            "random walk needs at least one step".into(),
        ));
    }
    if walks == 0 {
        return Err(Error::InvalidParameter("need at least one walk".into()));
    }
    if !mc.is_irreducible() {
        return Err(Error::ReducibleChain);
    }
    let n = mc.state_count();
    let table = WalkTable::new(mc)?;
    let mut counts = vec![0u64; n];
    for k in 0..walks {
        let c = walk_with_table(&table, n, steps, seed::derive(seed, &[k as u64]));
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
    }
    let total: u64 = counts.iter().sum();
    Ok(Distribution {
        values: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        method: EstimateMethod::RandomWalk { steps, walks },
    })
}

/// Normalized candidate scores with a deterministic argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    /// Node id for each score (candidate ids in the caller's graph).
    pub nodes: Vec<usize>,
    pub scores: Vec<f64>,
    /// Index into `nodes` of the lowest-index maximizer.
    pub argmax: usize,
    /// Set when a reducible chain was rerouted to the arborescence scorer.
    #[serde(default)]
    pub rerouted: bool,
}

fn lowest_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl ScoreVector {
    /// Normalizes nonnegative raw scores; the argmax is taken on the raw
    /// values.
    pub fn from_raw(nodes: Vec<usize>, raw: Vec<f64>) -> Result<Self> {
        if nodes.len() != raw.len() || raw.is_empty() {
            return Err(Error::InvalidParameter("score length mismatch".into()));
        }
        if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Numerical(
                "scores must be finite and nonnegative".into(),
            ));
        }
        let total = compensated_sum(raw.iter().copied());
        if total <= 0.0 {
            return Err(Error::Numerical("all scores are zero".into()));
        }
        let argmax = lowest_argmax(&raw);
        Ok(ScoreVector {
            nodes,
            scores: raw.iter().map(|v| v / total).collect(),
            argmax,
            rerouted: false,
        })
    }

    /// Scores given as natural logs; `-inf` stands for zero.
    pub fn from_log(nodes: Vec<usize>, logs: Vec<f64>) -> Result<Self> {
        if nodes.len() != logs.len() || logs.is_empty() {
            return Err(Error::InvalidParameter("score length mismatch".into()));
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY || max.is_nan() {
            return Err(Error::Numerical("all scores are zero".into()));
        }
        let argmax = lowest_argmax(&logs);
        let raw: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let mut sv = ScoreVector::from_raw(nodes, raw)?;
        sv.argmax = argmax;
        Ok(sv)
    }

    /// Indicator vector selecting `nodes[index]`.
    pub fn one_hot(nodes: Vec<usize>, index: usize) -> Self {
        let mut scores = vec![0.0; nodes.len()];
        scores[index] = 1.0;
        ScoreVector {
            nodes,
            scores,
            argmax: index,
            rerouted: false,
        }
    }

    pub fn predicted(&self) -> usize {
        self.nodes[self.argmax]
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Replaces node ids through `map` (`new = map[old]`).
    pub fn relabel(mut self, map: &[usize]) -> Self {
        self.nodes = self.nodes.iter().map(|&v| map[v]).collect();
        self
    }
}

fn check_scheme(mc: &MarkovChain, expected: Scheme) -> Result<()> {
    if mc.scheme != expected {
        return Err(Error::SchemeMismatch {
            expected: expected.as_str(),
            found: mc.scheme.as_str(),
        });
    }
    Ok(())
}

fn check_len(mc: &MarkovChain, pi: &Distribution) -> Result<()> {
    if pi.values.len() != mc.state_count() {
        return Err(Error::InvalidParameter(format!(
            "distribution has {} entries for {} states",
            pi.values.len(),
            mc.state_count()
        )));
    }
    Ok(())
}

/// Self-loops restoration: the scores are the stationary distribution.
pub fn score_self_loops(mc: &MarkovChain, pi: &Distribution) -> Result<ScoreVector> {
    check_scheme(mc, Scheme::SelfLoops)?;
    check_len(mc, pi)?;
    ScoreVector::from_raw((0..mc.state_count()).collect(), pi.values.clone())
}

/// No-loops restoration: divide each entry by the node's `w_in`, then
/// normalize.
pub fn score_no_loops(mc: &MarkovChain, pi: &Distribution) -> Result<ScoreVector> {
    check_scheme(mc, Scheme::NoLoops)?;
    check_len(mc, pi)?;
    let w_in = match &mc.aux {
        ChainAux::InDegrees(w) => w,
        _ => return Err(Error::InvalidParameter("no-loops chain lacks w_in".into())),
    };
    if let Some(node) = w_in.iter().position(|&w| w <= 0.0) {
        return Err(Error::ZeroInDegree { node });
    }
    let corrected = pi.values.iter().zip(w_in).map(|(p, w)| p / w).collect();
    ScoreVector::from_raw((0..mc.state_count()).collect(), corrected)
}

/// Naive restoration: the stationary distribution used verbatim.
pub fn score_naive(mc: &MarkovChain, pi: &Distribution) -> Result<ScoreVector> {
    check_scheme(mc, Scheme::Naive)?;
    check_len(mc, pi)?;
    ScoreVector::from_raw((0..mc.state_count()).collect(), pi.values.clone())
}

pub fn score(mc: &MarkovChain, pi: &Distribution) -> Result<ScoreVector> {
    match mc.scheme {
        Scheme::Naive => score_naive(mc, pi),
        Scheme::SelfLoops => score_self_loops(mc, pi),
        Scheme::NoLoops => score_no_loops(mc, pi),
    }
}
