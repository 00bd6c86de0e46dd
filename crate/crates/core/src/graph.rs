//! Latent multigraph representation: the rank-3 transition tensor shared by
//! ground-truth environments and learned models, plus the ground-truth
//! wrapper with deterministic categorical emissions.

use ndarray::{Array3, ArrayView1, ArrayViewMut1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("tensor must have at least one action and one state")]
    EmptyTensor,
    #[error("transition row (action {action}, state {state}) sums to {sum}, expected 1")]
    RowNotNormalized { action: usize, state: usize, sum: f64 },
    #[error("probability out of [0,1] at (action {action}, {from} -> {to}): {value}")]
    ProbabilityOutOfRange { action: usize, from: usize, to: usize, value: f64 },
    #[error("emission list has {got} entries for {expected} nodes")]
    EmissionLengthMismatch { got: usize, expected: usize },
    #[error("emission id {id} out of range for {n_observations} observations")]
    EmissionOutOfRange { id: usize, n_observations: usize },
    #[error("home node {home} out of range for {n_nodes} nodes")]
    HomeOutOfRange { home: usize, n_nodes: usize },
    #[error("boundary edge (action {action}, node {node}) out of range")]
    BoundaryOutOfRange { action: usize, node: usize },
    #[error("invalid probability {0} (must be in [0,1])")]
    InvalidProbability(f64),
    #[error("malformed graph json: {0}")]
    Json(String),
}

/// Action-conditional transition probabilities, shape (n_actions, n_states, n_states).
/// Entry (a, z, z') is P(z' | z, a). Every row over z' sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTensor {
    probs: Array3<f64>,
}

impl TransitionTensor {
    /// Wraps a raw tensor, checking row normalization and probability bounds.
    pub fn new(probs: Array3<f64>) -> Result<Self, GraphError> {
        let (n_actions, n_states, n_to) = probs.dim();
        if n_actions == 0 || n_states == 0 || n_to != n_states {
            return Err(GraphError::EmptyTensor);
        }
        for a in 0..n_actions {
            for z in 0..n_states {
                let mut sum = 0.0;
                for zp in 0..n_states {
                    let p = probs[[a, z, zp]];
                    if !(0.0..=1.0 + ROW_SUM_TOL).contains(&p) || p.is_nan() {
                        return Err(GraphError::ProbabilityOutOfRange {
                            action: a,
                            from: z,
                            to: zp,
                            value: p,
                        });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(GraphError::RowNotNormalized { action: a, state: z, sum });
                }
            }
        }
        Ok(Self { probs })
    }

    /// All-zero tensor builder for generators; rows must be filled and the
    /// result passed through [`TransitionTensor::new`].
    pub fn zeros_raw(n_actions: usize, n_states: usize) -> Array3<f64> {
        Array3::zeros((n_actions, n_states, n_states))
    }

    pub fn n_actions(&self) -> usize {
        self.probs.dim().0
    }

    pub fn n_states(&self) -> usize {
        self.probs.dim().1
    }

    pub fn prob(&self, action: usize, from: usize, to: usize) -> f64 {
        self.probs[[action, from, to]]
    }

    pub fn row(&self, action: usize, from: usize) -> ArrayView1<'_, f64> {
        self.probs.slice(ndarray::s![action, from, ..])
    }

    pub(crate) fn row_mut(&mut self, action: usize, from: usize) -> ArrayViewMut1<'_, f64> {
        self.probs.slice_mut(ndarray::s![action, from, ..])
    }

    pub fn raw(&self) -> &Array3<f64> {
        &self.probs
    }

    /// Exact support: all (action, from, to) triples with positive probability.
    pub fn support(&self) -> Vec<(usize, usize, usize)> {
        let (n_a, n_z, _) = self.probs.dim();
        let mut out = Vec::new();
        for a in 0..n_a {
            for z in 0..n_z {
                for zp in 0..n_z {
                    if self.probs[[a, z, zp]] > 0.0 {
                        out.push((a, z, zp));
                    }
                }
            }
        }
        out
    }

    /// Sparse rows (destination, probability), one Vec per (action, state),
    /// indexed action * n_states + state.
    pub fn sparse_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let (n_a, n_z, _) = self.probs.dim();
        let mut rows = Vec::with_capacity(n_a * n_z);
        for a in 0..n_a {
            for z in 0..n_z {
                let row: Vec<(usize, f64)> = (0..n_z)
                    .filter(|&zp| self.probs[[a, z, zp]] > 0.0)
                    .map(|zp| (zp, self.probs[[a, z, zp]]))
                    .collect();
                rows.push(row);
            }
        }
        rows
    }
}

/// A fully specified environment graph: transitions, deterministic emissions,
/// the episode home node, and which self-loop edges are topology boundaries.
#[derive(Debug, Clone)]
pub struct GroundTruthGraph {
    pub transition: TransitionTensor,
    /// Observation symbol emitted by each node.
    pub emission: Vec<usize>,
    pub n_observations: usize,
    pub home: usize,
    /// (action, node) pairs whose self-loop stems from a blocked/off-map move.
    pub boundary: Vec<(usize, usize)>,
}

impl GroundTruthGraph {
    pub fn new(
        transition: TransitionTensor,
        emission: Vec<usize>,
        n_observations: usize,
        home: usize,
        boundary: Vec<(usize, usize)>,
    ) -> Result<Self, GraphError> {
        let n_nodes = transition.n_states();
        if emission.len() != n_nodes {
            return Err(GraphError::EmissionLengthMismatch { got: emission.len(), expected: n_nodes });
        }
        if let Some(&id) = emission.iter().find(|&&id| id >= n_observations) {
            return Err(GraphError::EmissionOutOfRange { id, n_observations });
        }
        if home >= n_nodes {
            return Err(GraphError::HomeOutOfRange { home, n_nodes });
        }
        for &(a, z) in &boundary {
            if a >= transition.n_actions() || z >= n_nodes {
                return Err(GraphError::BoundaryOutOfRange { action: a, node: z });
            }
        }
        Ok(Self { transition, emission, n_observations, home, boundary })
    }

    pub fn n_nodes(&self) -> usize {
        self.transition.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.transition.n_actions()
    }

    /// Rewrites each boundary self-loop as stay (1 − p) / teleport home (p).
    /// Used by the variant where exit attempts occasionally reset the agent.
    pub fn with_teleport_home(&self, p_teleport: f64) -> Result<Self, GraphError> {
        if !(0.0..=1.0).contains(&p_teleport) {
            return Err(GraphError::InvalidProbability(p_teleport));
        }
        let mut probs = self.transition.raw().clone();
        for &(a, z) in &self.boundary {
            for zp in 0..self.n_nodes() {
                probs[[a, z, zp]] = 0.0;
            }
            probs[[a, z, z]] = 1.0 - p_teleport;
            probs[[a, z, self.home]] += p_teleport;
        }
        Ok(Self {
            transition: TransitionTensor::new(probs)?,
            emission: self.emission.clone(),
            n_observations: self.n_observations,
            home: self.home,
            boundary: self.boundary.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        let transitions: Vec<(usize, usize, usize, f64)> = self
            .transition
            .support()
            .into_iter()
            .map(|(a, z, zp)| (a, z, zp, self.transition.prob(a, z, zp)))
            .collect();
        let doc = GraphJson {
            n_actions: self.n_actions(),
            n_nodes: self.n_nodes(),
            n_observations: self.n_observations,
            emission: self.emission.clone(),
            transitions,
            home: self.home,
            boundary: self.boundary.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("graph is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let doc: GraphJson = serde_json::from_str(text).map_err(|e| GraphError::Json(e.to_string()))?;
        let mut probs = TransitionTensor::zeros_raw(doc.n_actions, doc.n_nodes);
        for (a, z, zp, p) in doc.transitions {
            if a >= doc.n_actions || z >= doc.n_nodes || zp >= doc.n_nodes {
                return Err(GraphError::Json(format!("transition ({a},{z},{zp}) out of range")));
            }
            probs[[a, z, zp]] = p;
        }
        Self::new(
            TransitionTensor::new(probs)?,
            doc.emission,
            doc.n_observations,
            doc.home,
            doc.boundary,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n_actions: usize,
    n_nodes: usize,
    n_observations: usize,
    emission: Vec<usize>,
    transitions: Vec<(usize, usize, usize, f64)>,
    home: usize,
    boundary: Vec<(usize, usize)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn swap_graph() -> GroundTruthGraph {
        // Two nodes, one action that swaps them.
        let probs = array![[[0.0, 1.0], [1.0, 0.0]]];
        GroundTruthGraph::new(TransitionTensor::new(probs).unwrap(), vec![0, 1], 2, 0, vec![])
            .unwrap()
    }

    #[test]
    fn rejects_unnormalized_rows() {
        let probs = array![[[0.5, 0.4], [1.0, 0.0]]];
        assert!(matches!(
            TransitionTensor::new(probs),
            Err(GraphError::RowNotNormalized { .. })
        ));
    }

    #[test]
    fn rejects_empty_action_tensor() {
        let probs = Array3::<f64>::zeros((0, 3, 3));
        assert!(matches!(TransitionTensor::new(probs), Err(GraphError::EmptyTensor)));
    }

    #[test]
    fn rejects_bad_emission_and_home() {
        let t = || TransitionTensor::new(array![[[0.0, 1.0], [1.0, 0.0]]]).unwrap();
        assert!(GroundTruthGraph::new(t(), vec![0, 5], 2, 0, vec![]).is_err());
        assert!(GroundTruthGraph::new(t(), vec![0], 2, 0, vec![]).is_err());
        assert!(GroundTruthGraph::new(t(), vec![0, 1], 2, 7, vec![]).is_err());
    }

    #[test]
    fn support_enumerates_nonzero() {
        let g = swap_graph();
        assert_eq!(g.transition.support(), vec![(0, 0, 1), (0, 1, 0)]);
    }

    #[test]
    fn teleport_rewrites_boundary_loops() {
        let probs = array![[[1.0, 0.0], [0.0, 1.0]]];
        let g = GroundTruthGraph::new(
            TransitionTensor::new(probs).unwrap(),
            vec![0, 1],
            2,
            0,
            vec![(0, 1)],
        )
        .unwrap();
        let t = g.with_teleport_home(0.1).unwrap();
        assert!((t.transition.prob(0, 1, 1) - 0.9).abs() < 1e-15);
        assert!((t.transition.prob(0, 1, 0) - 0.1).abs() < 1e-15);
        // Untagged rows untouched.
        assert_eq!(t.transition.prob(0, 0, 0), 1.0);
    }

    #[test]
    fn teleport_at_home_keeps_row_normalized() {
        let probs = array![[[1.0, 0.0], [0.0, 1.0]]];
        let g = GroundTruthGraph::new(
            TransitionTensor::new(probs).unwrap(),
            vec![0, 1],
            2,
            0,
            vec![(0, 0)],
        )
        .unwrap();
        let t = g.with_teleport_home(0.1).unwrap();
        // Self-loop at home: stay and teleport coincide.
        assert!((t.transition.prob(0, 0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let g = swap_graph();
        let text = g.to_json();
        let back = GroundTruthGraph::from_json(&text).unwrap();
        assert_eq!(back.emission, g.emission);
        assert_eq!(back.home, g.home);
        assert_eq!(back.transition, g.transition);
    }
}
