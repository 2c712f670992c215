//! Length-preserving dynamic time warping.
//!
//! A trial is aligned to a reference of the same length `N` in four stages:
//!
//! 1. [`build_cost_matrix`]: `c(i, j) = |reference[i] - trial[j]|`.
//! 2. [`optimal_path`]: minimum accumulated-cost path from `(0, 0)` to
//!    `(N-1, N-1)` with steps `(1,1)`, `(1,0)`, `(0,1)` in
//!    `(reference, trial)` index order.
//! 3. [`restrict_path`]: every node reached by a `(0,1)` step (one that does
//!    not advance the reference index) is dropped, leaving one node per
//!    reference index.
//! 4. [`reconstruct`]: the warped trial takes `trial[j]` for the node at each
//!    reference index `i`, repeating the last sample if the path is short.
//!
//! [`align_trial`] composes the four.
//!
//! Backtracking prefers the diagonal, then `(1,0)`, then `(0,1)` when
//! accumulated costs tie, which yields the shortest of the optimal paths.

use crate::error::{Error, Result};

/// A node of a warping path: 0-based `(reference, trial)` indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node {
    pub reference: usize,
    pub trial: usize,
}

impl Node {
    pub const fn new(reference: usize, trial: usize) -> Self {
        Self { reference, trial }
    }
}

impl From<(usize, usize)> for Node {
    fn from((reference, trial): (usize, usize)) -> Self {
        Self { reference, trial }
    }
}

/// Dense `N x N` local cost matrix, row-major by reference index.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    /// Wraps precomputed costs. Values must be finite and nonnegative.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("cost matrix"));
        }
        if values.len() != n * n {
            return Err(Error::LengthMismatch {
                left: n * n,
                right: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::NonFinite {
                trial: k / n,
                index: k % n,
            });
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Admissible warping path with its accumulated cost.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpPath {
    nodes: Vec<Node>,
    total_cost: f64,
}

impl WarpPath {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Sum of local costs over every visited node, start cell included.
    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// One node per reference index `0..k`, trial indices non-decreasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestrictedPath {
    nodes: Vec<Node>,
}

impl RestrictedPath {
    /// Validates an explicit node list. Reference indices must run
    /// `0, 1, .., k-1` and trial indices must not decrease.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Empty("restricted path"));
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.reference != i {
                return Err(Error::BadPath(format!(
                    "node {i} has reference index {}",
                    node.reference
                )));
            }
        }
        if nodes.windows(2).any(|w| w[1].trial < w[0].trial) {
            return Err(Error::BadPath("trial indices decrease".into()));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trial index used at each reference index.
    pub fn trial_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().map(|n| n.trial)
    }
}

pub fn build_cost_matrix(reference: &[f64], trial: &[f64]) -> Result<CostMatrix> {
    if reference.len() != trial.len() {
        return Err(Error::LengthMismatch {
            left: reference.len(),
            right: trial.len(),
        });
    }
    let n = reference.len();
    if n == 0 {
        return Err(Error::Empty("signal"));
    }
    if let Some(index) = reference.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { trial: 0, index });
    }
    if let Some(index) = trial.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { trial: 1, index });
    }
    let mut values = Vec::with_capacity(n * n);
    for &r in reference {
        values.extend(trial.iter().map(|&s| (r - s).abs()));
    }
    Ok(CostMatrix { n, values })
}

/// Minimum-cost admissible path through `c`.
pub fn optimal_path(c: &CostMatrix) -> WarpPath {
    let n = c.n;
    let acc = accumulate(c);
    let at = |i: usize, j: usize| acc[i * n + j];

    let mut nodes = Vec::with_capacity(2 * n);
    let (mut i, mut j) = (n - 1, n - 1);
    nodes.push(Node::new(i, j));
    while i > 0 || j > 0 {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = at(i - 1, j - 1);
            let up = at(i - 1, j);
            let left = at(i, j - 1);
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        nodes.push(Node::new(i, j));
    }
    nodes.reverse();
    WarpPath {
        nodes,
        total_cost: at(n - 1, n - 1),
    }
}

/// Accumulated cost table `D(i,j) = c(i,j) + min(D(i-1,j-1), D(i-1,j), D(i,j-1))`.
fn accumulate(c: &CostMatrix) -> Vec<f64> {
    let n = c.n;
    let mut acc = vec![0.0; n * n];
    acc[0] = c.get(0, 0);
    for j in 1..n {
        acc[j] = acc[j - 1] + c.get(0, j);
    }
    for i in 1..n {
        let (done, rest) = acc.split_at_mut(i * n);
        let prev = &done[(i - 1) * n..];
        let cur = &mut rest[..n];
        let costs = c.row(i);
        cur[0] = prev[0] + costs[0];
        for j in 1..n {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = best + costs[j];
        }
    }
    acc
}

/// Drops every node entered through a `(0,1)` step.
pub fn restrict_path(p: &WarpPath) -> RestrictedPath {
    let mut nodes = Vec::with_capacity(p.nodes.len());
    if let Some(&first) = p.nodes.first() {
        nodes.push(first);
    }
    for w in p.nodes.windows(2) {
        if w[1].reference != w[0].reference {
            nodes.push(w[1]);
        }
    }
    RestrictedPath { nodes }
}

/// Builds the warped trial of length `n_target` from a restricted path.
pub fn reconstruct(trial: &[f64], rp: &RestrictedPath, n_target: usize) -> Result<Vec<f64>> {
    if rp.len() > n_target {
        return Err(Error::IndexOutOfRange(format!(
            "path covers {} reference indices, target length is {n_target}",
            rp.len()
        )));
    }
    let mut out = Vec::with_capacity(n_target);
    for node in &rp.nodes {
        let v = trial.get(node.trial).ok_or_else(|| {
            Error::IndexOutOfRange(format!(
                "trial index {} for a signal of length {}",
                node.trial,
                trial.len()
            ))
        })?;
        out.push(*v);
    }
    let last = *out.last().ok_or(Error::Empty("restricted path"))?;
    out.resize(n_target, last);
    Ok(out)
}

/// Warps `trial` onto the time base of `reference`.
pub fn align_trial(reference: &[f64], trial: &[f64]) -> Result<Vec<f64>> {
    Ok(align_with_path(reference, trial)?.0)
}

/// Like [`align_trial`] but also returns the unrestricted path.
pub fn align_with_path(reference: &[f64], trial: &[f64]) -> Result<(Vec<f64>, WarpPath)> {
    let cost = build_cost_matrix(reference, trial)?;
    let path = optimal_path(&cost);
    let restricted = restrict_path(&path);
    let warped = reconstruct(trial, &restricted, reference.len())?;
    Ok((warped, path))
}
