//! Visit counts and the empirical transition model shared by all learners.

use crate::error::GameError;
use crate::game_model::{Dynamics, JointActionSpace, Trajectory, TransitionModel};

/// `N_h(s, a)`, `N_h(s, a, s')` and `P̂_h(· | s, a)`. Rows with no visits are
/// uniform over states.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalModel {
    horizon: usize,
    num_states: usize,
    initial_state: usize,
    space: JointActionSpace,
    counts: Vec<u64>,
    transition_counts: Vec<u64>,
    p_hat: Vec<f64>,
}

impl EmpiricalModel {
    pub fn new(horizon: usize, num_states: usize, initial_state: usize, space: JointActionSpace) -> Self {
        let cells = horizon * num_states * space.size();
        EmpiricalModel {
            horizon,
            num_states,
            initial_state,
            space,
            counts: vec![0; cells],
            transition_counts: vec![0; cells * num_states],
            p_hat: vec![1.0 / num_states as f64; cells * num_states],
        }
    }

    /// An empty model with the shape of `model`.
    pub fn like<M: TransitionModel + ?Sized>(model: &M) -> Self {
        Self::new(model.horizon(), model.num_states(), model.initial_state(), model.joint_space().clone())
    }

    #[inline]
    fn cell(&self, h: usize, s: usize, joint: usize) -> usize {
        (h * self.num_states + s) * self.space.size() + joint
    }

    pub fn num_cells(&self) -> usize {
        self.counts.len()
    }

    #[inline]
    pub fn count(&self, h: usize, s: usize, joint: usize) -> u64 {
        self.counts[self.cell(h, s, joint)]
    }

    pub fn transition_count(&self, h: usize, s: usize, joint: usize, next: usize) -> u64 {
        self.transition_counts[self.cell(h, s, joint) * self.num_states + next]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn p_hat(&self) -> &[f64] {
        &self.p_hat
    }

    /// Adds one observed transition and refreshes that row of `P̂`.
    pub fn record(&mut self, h: usize, s: usize, joint: usize, next: usize) {
        let c = self.cell(h, s, joint);
        let n = self.num_states;
        self.counts[c] += 1;
        self.transition_counts[c * n + next] += 1;
        let total = self.counts[c] as f64;
        for sp in 0..n {
            self.p_hat[c * n + sp] = self.transition_counts[c * n + sp] as f64 / total;
        }
    }

    /// Records every step of an episode; step `h` of the trajectory is step `h` of the game.
    pub fn update(&mut self, trajectory: &Trajectory) -> Result<(), GameError> {
        if trajectory.steps.len() != self.horizon {
            return Err(GameError::Dimension(format!(
                "trajectory has {} steps, model horizon is {}",
                trajectory.steps.len(),
                self.horizon
            )));
        }
        for step in &trajectory.steps {
            if step.state >= self.num_states || step.next_state >= self.num_states || step.joint >= self.space.size() {
                return Err(GameError::Dimension("trajectory step outside the model".into()));
            }
        }
        for (h, step) in trajectory.steps.iter().enumerate() {
            self.record(h, step.state, step.joint, step.next_state);
        }
        Ok(())
    }

    /// Deep copy of the current `P̂` as a transition-only model.
    pub fn snapshot(&self) -> Dynamics {
        Dynamics::new(self.horizon, self.num_states, self.space.counts().to_vec(), self.initial_state, self.p_hat.clone())
            .expect("model tables have consistent shapes")
    }
}

impl TransitionModel for EmpiricalModel {
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn num_states(&self) -> usize {
        self.num_states
    }
    fn initial_state(&self) -> usize {
        self.initial_state
    }
    fn joint_space(&self) -> &JointActionSpace {
        &self.space
    }
    fn transition(&self, h: usize, s: usize, joint: usize) -> &[f64] {
        let c = self.cell(h, s, joint) * self.num_states;
        &self.p_hat[c..c + self.num_states]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_model::Step;

    fn model() -> EmpiricalModel {
        EmpiricalModel::new(2, 2, 0, JointActionSpace::new(vec![2, 2]).unwrap())
    }

    fn traj(steps: &[(usize, usize, usize)]) -> Trajectory {
        Trajectory {
            seed: 0,
            stream: 0,
            steps: steps.iter().map(|&(state, joint, next_state)| Step { state, joint, rewards: vec![], next_state }).collect(),
        }
    }

    #[test]
    fn unvisited_rows_are_uniform() {
        let m = model();
        assert_eq!(m.transition(1, 1, 3), &[0.5, 0.5]);
        assert_eq!(m.count(1, 1, 3), 0);
    }

    #[test]
    fn single_visit_gives_point_mass() {
        let mut m = model();
        m.update(&traj(&[(0, 1, 1), (1, 2, 0)])).unwrap();
        assert_eq!(m.count(0, 0, 1), 1);
        assert_eq!(m.transition(0, 0, 1), &[0.0, 1.0]);
        assert_eq!(m.transition(1, 1, 2), &[1.0, 0.0]);
        assert_eq!(m.transition(0, 0, 0), &[0.5, 0.5]);
    }

    #[test]
    fn two_successors_average() {
        let mut m = model();
        m.update(&traj(&[(0, 1, 1), (1, 2, 0)])).unwrap();
        m.update(&traj(&[(0, 1, 0), (0, 2, 0)])).unwrap();
        assert_eq!(m.transition(0, 0, 1), &[0.5, 0.5]);
        for h in 0..2 {
            for s in 0..2 {
                for j in 0..4 {
                    let total: u64 = (0..2).map(|sp| m.transition_count(h, s, j, sp)).sum();
                    assert_eq!(total, m.count(h, s, j));
                }
            }
        }
    }

    #[test]
    fn snapshot_is_a_copy() {
        let mut m = model();
        let before = m.snapshot();
        m.record(0, 0, 0, 1);
        assert_eq!(before.transition(0, 0, 0), &[0.5, 0.5]);
        assert_eq!(m.snapshot().transition(0, 0, 0), &[0.0, 1.0]);
    }

    #[test]
    fn malformed_trajectories_are_rejected() {
        let mut m = model();
        assert!(m.update(&traj(&[(0, 1, 1)])).is_err());
        assert!(m.update(&traj(&[(0, 1, 1), (1, 9, 0)])).is_err());
        assert_eq!(m.counts().iter().sum::<u64>(), 0);
    }
}
