//! Observation-action streams collected from an environment, segmented into
//! episodes. Transitions never span an episode boundary: each episode restarts
//! the model's forward recursion and contributes its own step transitions.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("trajectory is empty")]
    Empty,
    #[error("observation id {id} out of range ({n_observations} observations)")]
    ObservationOutOfRange { id: usize, n_observations: usize },
    #[error("action id {id} out of range ({n_actions} actions)")]
    ActionOutOfRange { id: usize, n_actions: usize },
}

/// An interleaved observation/action stream with episode markers and,
/// optionally, the ground-truth node ids (captured for evaluation only).
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    observations: Vec<usize>,
    actions: Vec<usize>,
    true_nodes: Vec<usize>,
    /// Index into `observations` where each episode begins; first entry is 0.
    episode_starts: Vec<usize>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts a new episode with its initial observation.
    pub fn begin_episode(&mut self, observation: usize, node: Option<usize>) {
        self.episode_starts.push(self.observations.len());
        self.observations.push(observation);
        if let Some(node) = node {
            self.true_nodes.push(node);
        }
        debug_assert!(self.true_nodes.is_empty() || self.true_nodes.len() == self.observations.len());
    }

    /// Appends one step (the action taken and the observation that followed)
    /// to the current episode.
    pub fn push_step(&mut self, action: usize, observation: usize, node: Option<usize>) {
        assert!(!self.episode_starts.is_empty(), "push_step before begin_episode");
        self.actions.push(action);
        self.observations.push(observation);
        if let Some(node) = node {
            self.true_nodes.push(node);
        }
        debug_assert!(self.true_nodes.is_empty() || self.true_nodes.len() == self.observations.len());
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Number of environment steps recorded (= number of actions).
    pub fn n_steps(&self) -> usize {
        self.actions.len()
    }

    pub fn n_episodes(&self) -> usize {
        self.episode_starts.len()
    }

    pub fn observations(&self) -> &[usize] {
        &self.observations
    }

    pub fn episode_starts(&self) -> &[usize] {
        &self.episode_starts
    }

    /// Ground-truth nodes, present only when the trajectory was recorded with
    /// evaluation capture enabled.
    pub fn true_nodes(&self) -> Option<&[usize]> {
        if self.true_nodes.len() == self.observations.len() && !self.observations.is_empty() {
            Some(&self.true_nodes)
        } else {
            None
        }
    }

    /// Iterates episodes as (observations, actions) slice pairs. An episode
    /// with k observations has k − 1 actions.
    pub fn episodes(&self) -> impl Iterator<Item = EpisodeView<'_>> {
        (0..self.episode_starts.len()).map(move |e| {
            let start = self.episode_starts[e];
            let end = self.episode_starts.get(e + 1).copied().unwrap_or(self.observations.len());
            EpisodeView {
                observations: &self.observations[start..end],
                actions: &self.actions[start - e..end - e - 1],
                start_index: start,
            }
        })
    }

    /// Iterates over within-episode transitions as
    /// (from observation index, action, to observation index).
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.episodes().flat_map(|ep| {
            let base = ep.start_index;
            ep.actions
                .iter()
                .enumerate()
                .map(move |(i, &a)| (base + i, a, base + i + 1))
                .collect::<Vec<_>>()
        })
    }

    pub fn validate(&self, n_observations: usize, n_actions: usize) -> Result<(), TrajectoryError> {
        if self.observations.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        if let Some(&id) = self.observations.iter().find(|&&x| x >= n_observations) {
            return Err(TrajectoryError::ObservationOutOfRange { id, n_observations });
        }
        if let Some(&id) = self.actions.iter().find(|&&a| a >= n_actions) {
            return Err(TrajectoryError::ActionOutOfRange { id, n_actions });
        }
        Ok(())
    }

    /// Single-episode trajectory from plain observation/action slices.
    pub fn from_single_episode(observations: Vec<usize>, actions: Vec<usize>) -> Self {
        assert_eq!(actions.len() + 1, observations.len(), "need one more observation than actions");
        Self { observations, actions, true_nodes: Vec::new(), episode_starts: vec![0] }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpisodeView<'a> {
    pub observations: &'a [usize],
    pub actions: &'a [usize],
    /// Index of this episode's first observation in the full trajectory.
    pub start_index: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_episode_traj() -> Trajectory {
        let mut t = Trajectory::new();
        t.begin_episode(3, None);
        t.push_step(0, 4, None);
        t.push_step(1, 5, None);
        t.begin_episode(3, None);
        t.push_step(1, 6, None);
        t
    }

    #[test]
    fn episode_slices_line_up() {
        let t = two_episode_traj();
        assert_eq!(t.len(), 5);
        assert_eq!(t.n_steps(), 3);
        assert_eq!(t.n_episodes(), 2);
        let eps: Vec<_> = t.episodes().collect();
        assert_eq!(eps[0].observations, &[3, 4, 5]);
        assert_eq!(eps[0].actions, &[0, 1]);
        assert_eq!(eps[1].observations, &[3, 6]);
        assert_eq!(eps[1].actions, &[1]);
    }

    #[test]
    fn transitions_skip_episode_boundary() {
        let t = two_episode_traj();
        let trans: Vec<_> = t.transitions().collect();
        // No transition from index 2 (end of episode 0) to index 3.
        assert_eq!(trans, vec![(0, 0, 1), (1, 1, 2), (3, 1, 4)]);
    }

    #[test]
    fn validate_catches_out_of_range() {
        let t = two_episode_traj();
        assert!(t.validate(7, 2).is_ok());
        assert!(matches!(t.validate(5, 2), Err(TrajectoryError::ObservationOutOfRange { .. })));
        assert!(matches!(t.validate(7, 1), Err(TrajectoryError::ActionOutOfRange { .. })));
        assert!(matches!(Trajectory::new().validate(1, 1), Err(TrajectoryError::Empty)));
    }

    #[test]
    fn true_nodes_only_when_complete() {
        let mut t = Trajectory::new();
        t.begin_episode(0, Some(9));
        t.push_step(0, 1, Some(8));
        assert_eq!(t.true_nodes(), Some(&[9, 8][..]));
        assert!(two_episode_traj().true_nodes().is_none());
    }
}
