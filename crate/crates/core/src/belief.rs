//! Dirichlet posterior over the transition tensor and the closed-form
//! exploration utility.
//!
//! For a row with pseudo-observation vector b the utility is the
//! Jensen-Shannon divergence of the next-state distributions drawn from
//! Dir(b):
//!
//! ```text
//! u(b) = H(b / 1ᵀb) + (1ᵀ(b ⊙ ψ(b+1))) / 1ᵀb − ψ(1ᵀb + 1)
//! ```
//!
//! Counts are kept sparse per (action, source) row; all unobserved
//! destinations share the symmetric prior mass α, which keeps both the
//! utility and the mean-transition computations proportional to the number
//! of distinct observed destinations rather than to the state count.

use crate::graph::TransitionTensor;
use crate::math::{digamma, entropy};
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("utility requires a nonempty vector of positive entries; got entry {0}")]
    NonpositiveEntry(f64),
    #[error("utility requires a nonempty vector")]
    EmptyVector,
    #[error("prior concentration must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("counts shape ({actions}, {states}) does not match belief ({expected_actions}, {expected_states})")]
    ShapeMismatch { actions: usize, states: usize, expected_actions: usize, expected_states: usize },
    #[error("index (action {action}, state {state}) out of range")]
    IndexOutOfRange { action: usize, state: usize },
}

/// Closed-form exploration utility of a Dirichlet parameter vector, in nats.
pub fn utility(b: &[f64]) -> Result<f64, BeliefError> {
    if b.is_empty() {
        return Err(BeliefError::EmptyVector);
    }
    if let Some(&bad) = b.iter().find(|&&v| !(v > 0.0)) {
        return Err(BeliefError::NonpositiveEntry(bad));
    }
    let total: f64 = b.iter().sum();
    let mut ent = 0.0;
    let mut mid = 0.0;
    for &v in b {
        let p = v / total;
        ent -= p * p.ln();
        mid += v * digamma(v + 1.0);
    }
    Ok(ent + mid / total - digamma(total + 1.0))
}

/// Analytic expected entropy E[H(t)] for t ~ Dir(b). The utility decomposes
/// as H(E[t]) − E[H(t)]; this is the second term.
pub fn expected_entropy(b: &[f64]) -> f64 {
    let total: f64 = b.iter().sum();
    let mid: f64 = b.iter().map(|&v| v * digamma(v + 1.0)).sum();
    digamma(1.0 + total) - mid / total
}

/// Utility via the H(E[t]) − E[H(t)] decomposition; used to cross-check the
/// single-expression form.
pub fn utility_decomposed(b: &[f64]) -> f64 {
    let total: f64 = b.iter().sum();
    let mean: Vec<f64> = b.iter().map(|&v| v / total).collect();
    entropy(&mean) - expected_entropy(b)
}

/// Nonnegative real transition counts, stored sparsely per (action, source).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTensor {
    n_actions: usize,
    n_states: usize,
    /// Row a * n_states + z holds sorted (destination, count) pairs.
    rows: Vec<Vec<(u32, f64)>>,
    totals: Vec<f64>,
}

impl CountTensor {
    pub fn zeros(n_actions: usize, n_states: usize) -> Self {
        Self {
            n_actions,
            n_states,
            rows: vec![Vec::new(); n_actions * n_states],
            totals: vec![0.0; n_actions * n_states],
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    fn row_index(&self, action: usize, from: usize) -> usize {
        debug_assert!(action < self.n_actions && from < self.n_states);
        action * self.n_states + from
    }

    pub fn add(&mut self, action: usize, from: usize, to: usize, weight: f64) {
        debug_assert!(to < self.n_states);
        let idx = self.row_index(action, from);
        let row = &mut self.rows[idx];
        match row.binary_search_by_key(&(to as u32), |&(d, _)| d) {
            Ok(pos) => row[pos].1 += weight,
            Err(pos) => row.insert(pos, (to as u32, weight)),
        }
        self.totals[idx] += weight;
    }

    pub fn get(&self, action: usize, from: usize, to: usize) -> f64 {
        let row = &self.rows[self.row_index(action, from)];
        row.binary_search_by_key(&(to as u32), |&(d, _)| d)
            .map(|pos| row[pos].1)
            .unwrap_or(0.0)
    }

    pub fn row_entries(&self, action: usize, from: usize) -> &[(u32, f64)] {
        &self.rows[self.row_index(action, from)]
    }

    pub fn row_total(&self, action: usize, from: usize) -> f64 {
        self.totals[self.row_index(action, from)]
    }

    pub fn total(&self) -> f64 {
        self.totals.iter().sum()
    }

    pub fn iter_nonzero(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(move |(idx, row)| {
            let action = idx / self.n_states;
            let from = idx % self.n_states;
            row.iter().map(move |&(to, w)| (action, from, to as usize, w))
        })
    }

    pub fn from_dense(dense: &Array3<f64>) -> Self {
        let (n_a, n_z, _) = dense.dim();
        let mut out = Self::zeros(n_a, n_z);
        for a in 0..n_a {
            for z in 0..n_z {
                for zp in 0..n_z {
                    let w = dense[[a, z, zp]];
                    if w != 0.0 {
                        out.add(a, z, zp, w);
                    }
                }
            }
        }
        out
    }
}

/// One-step information-gain table, shape (n_states, n_actions).
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityTable {
    values: Array2<f64>,
}

impl UtilityTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { values: Array2::zeros((n_states, n_actions)) }
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[[state, action]]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[[state, action]] = value;
    }

    pub fn n_states(&self) -> usize {
        self.values.dim().0
    }

    pub fn n_actions(&self) -> usize {
        self.values.dim().1
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Uniformly scales every entry; a positive rescaling must not change
    /// the greedy policy extracted from it.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { values: &self.values * factor }
    }
}

/// Per-(action, source) Dirichlet posterior over the transition tensor:
/// b_az = c_az + α·1.
#[derive(Debug, Clone)]
pub struct DirichletBelief {
    counts: CountTensor,
    alpha: f64,
}

impl DirichletBelief {
    pub fn new(n_actions: usize, n_states: usize, alpha: f64) -> Result<Self, BeliefError> {
        if !(alpha > 0.0) {
            return Err(BeliefError::InvalidAlpha(alpha));
        }
        Ok(Self { counts: CountTensor::zeros(n_actions, n_states), alpha })
    }

    pub fn with_counts(counts: CountTensor, alpha: f64) -> Result<Self, BeliefError> {
        if !(alpha > 0.0) {
            return Err(BeliefError::InvalidAlpha(alpha));
        }
        Ok(Self { counts, alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn counts(&self) -> &CountTensor {
        &self.counts
    }

    pub fn n_actions(&self) -> usize {
        self.counts.n_actions()
    }

    pub fn n_states(&self) -> usize {
        self.counts.n_states()
    }

    /// Replaces the whole counts tensor. Counts are recomputed from scratch
    /// after each fresh decoding, so this substitutes rather than increments.
    pub fn update_counts(&mut self, counts: CountTensor) -> Result<(), BeliefError> {
        if counts.n_actions() != self.counts.n_actions() || counts.n_states() != self.counts.n_states() {
            return Err(BeliefError::ShapeMismatch {
                actions: counts.n_actions(),
                states: counts.n_states(),
                expected_actions: self.counts.n_actions(),
                expected_states: self.counts.n_states(),
            });
        }
        self.counts = counts;
        Ok(())
    }

    /// Adds a single observed transition.
    pub fn record_transition(&mut self, action: usize, from: usize, to: usize) {
        self.counts.add(action, from, to, 1.0);
    }

    /// Dense posterior parameter vector b = c + α·1 for one row.
    pub fn posterior_row(&self, action: usize, from: usize) -> Vec<f64> {
        let mut b = vec![self.alpha; self.n_states()];
        for &(to, w) in self.counts.row_entries(action, from) {
            b[to as usize] += w;
        }
        b
    }

    /// Utility of one row, computed sparsely: destinations with zero count
    /// all sit at the prior α and are folded into closed-form bulk terms.
    pub fn utility_row(&self, action: usize, from: usize) -> f64 {
        let entries = self.counts.row_entries(action, from);
        let n = self.n_states() as f64;
        let alpha = self.alpha;
        let total = self.counts.row_total(action, from) + n * alpha;
        let m = n - entries.len() as f64;
        let mut ent = 0.0;
        let mut mid = 0.0;
        for &(_, c) in entries {
            let b = c + alpha;
            let p = b / total;
            ent -= p * p.ln();
            mid += b * digamma(b + 1.0);
        }
        if m > 0.0 {
            let p = alpha / total;
            ent -= m * p * p.ln();
            mid += m * alpha * digamma(alpha + 1.0);
        }
        ent + mid / total - digamma(total + 1.0)
    }

    /// Utility of every (state, action) pair under the current posterior.
    pub fn utility_table(&self) -> UtilityTable {
        let prior = self.prior_utility();
        let mut table = UtilityTable::zeros(self.n_states(), self.n_actions());
        for a in 0..self.n_actions() {
            for z in 0..self.n_states() {
                let u = if self.counts.row_entries(a, z).is_empty() {
                    prior
                } else {
                    self.utility_row(a, z)
                };
                table.set(z, a, u);
            }
        }
        table
    }

    /// Utility of a row with no observed transitions: the same constant for
    /// every untouched (state, action) pair.
    pub fn prior_utility(&self) -> f64 {
        let n = self.n_states() as f64;
        (self.n_states() as f64).ln() + digamma(self.alpha + 1.0) - digamma(n * self.alpha + 1.0)
    }

    /// Posterior-mean transition tensor t̄_az = b_az / 1ᵀb_az, dense form.
    pub fn mean_transition(&self) -> TransitionTensor {
        let n_a = self.n_actions();
        let n_z = self.n_states();
        let mut probs = Array3::from_elem((n_a, n_z, n_z), 0.0);
        for a in 0..n_a {
            for z in 0..n_z {
                let total = self.counts.row_total(a, z) + n_z as f64 * self.alpha;
                let flat = self.alpha / total;
                for zp in 0..n_z {
                    probs[[a, z, zp]] = flat;
                }
                for &(zp, c) in self.counts.row_entries(a, z) {
                    probs[[a, z, zp as usize]] += c / total;
                }
            }
        }
        TransitionTensor::new(probs).expect("posterior mean rows are normalized by construction")
    }

    /// Sparse planner view of the posterior mean.
    pub fn expected_view(&self) -> ExpectedTransitions {
        let n_rows = self.n_actions() * self.n_states();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut entries = Vec::new();
        let mut flat = Vec::with_capacity(n_rows);
        let mut norm = Vec::with_capacity(n_rows);
        row_ptr.push(0u32);
        for a in 0..self.n_actions() {
            for z in 0..self.n_states() {
                for &(to, c) in self.counts.row_entries(a, z) {
                    entries.push((to, c));
                }
                row_ptr.push(entries.len() as u32);
                flat.push(self.alpha);
                norm.push(self.counts.row_total(a, z) + self.n_states() as f64 * self.alpha);
            }
        }
        ExpectedTransitions {
            n_actions: self.n_actions(),
            n_states: self.n_states(),
            row_ptr,
            entries,
            flat,
            norm,
        }
    }
}

/// Row-stochastic transition expectation in "sparse + flat" form: a row's
/// probability of destination j is (excess_j + flat) / norm, where excess is
/// zero for unlisted destinations. Sparse rows from a Dirichlet belief have
/// flat = α; rows lifted from an explicit tensor have flat = 0.
#[derive(Debug, Clone)]
pub struct ExpectedTransitions {
    n_actions: usize,
    n_states: usize,
    row_ptr: Vec<u32>,
    entries: Vec<(u32, f64)>,
    flat: Vec<f64>,
    norm: Vec<f64>,
}

impl ExpectedTransitions {
    pub fn from_tensor(tensor: &TransitionTensor) -> Self {
        let n_a = tensor.n_actions();
        let n_z = tensor.n_states();
        let mut row_ptr = Vec::with_capacity(n_a * n_z + 1);
        let mut entries = Vec::new();
        row_ptr.push(0u32);
        for a in 0..n_a {
            for z in 0..n_z {
                for zp in 0..n_z {
                    let p = tensor.prob(a, z, zp);
                    if p > 0.0 {
                        entries.push((zp as u32, p));
                    }
                }
                row_ptr.push(entries.len() as u32);
            }
        }
        Self {
            n_actions: n_a,
            n_states: n_z,
            row_ptr,
            entries,
            flat: vec![0.0; n_a * n_z],
            norm: vec![1.0; n_a * n_z],
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn row(&self, action: usize, from: usize) -> RowView<'_> {
        let idx = action * self.n_states + from;
        RowView {
            entries: &self.entries[self.row_ptr[idx] as usize..self.row_ptr[idx + 1] as usize],
            flat: self.flat[idx],
            norm: self.norm[idx],
        }
    }

    pub fn prob(&self, action: usize, from: usize, to: usize) -> f64 {
        let row = self.row(action, from);
        let excess = row
            .entries
            .iter()
            .find(|&&(d, _)| d as usize == to)
            .map(|&(_, w)| w)
            .unwrap_or(0.0);
        (excess + row.flat) / row.norm
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    pub entries: &'a [(u32, f64)],
    pub flat: f64,
    pub norm: f64,
}

impl RowView<'_> {
    /// Expected value of v under this row's distribution. `sum_v` must be the
    /// sum of all entries of v.
    #[inline]
    pub fn expectation(&self, v: &[f64], sum_v: f64) -> f64 {
        let mut acc = 0.0;
        for &(to, w) in self.entries {
            acc += w * v[to as usize];
        }
        (acc + self.flat * sum_v) / self.norm
    }
}
