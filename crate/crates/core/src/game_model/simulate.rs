use rand::Rng;

use crate::error::GameError;
use crate::rng::{episode_rng, reward_rng};

use super::{CorrelatedPolicy, MarkovGame, RewardKind, TransitionModel};

/// One step of an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub state: usize,
    pub joint: usize,
    /// Realized reward per reward table; empty for reward-free paths.
    pub rewards: Vec<f64>,
    pub next_state: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub stream: u64,
    pub steps: Vec<Step>,
}

/// Inverse-CDF draw from a probability vector. The vector is used as given;
/// if rounding leaves `u` past the cumulative mass, the last positive entry is returned.
pub fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

fn check_policy<M: TransitionModel + ?Sized>(model: &M, policy: &CorrelatedPolicy) -> Result<(), GameError> {
    policy.check_shape(model.horizon(), model.num_states(), model.joint_space())
}

/// Rolls out one episode of the dynamics only; no reward is read.
pub fn sample_path<M: TransitionModel + ?Sized>(
    model: &M,
    policy: &CorrelatedPolicy,
    seed: u64,
    stream: u64,
) -> Result<Trajectory, GameError> {
    check_policy(model, policy)?;
    let mut rng = episode_rng(seed, stream);
    let mut state = model.initial_state();
    let mut steps = Vec::with_capacity(model.horizon());
    for h in 0..model.horizon() {
        let joint = sample_categorical(&mut rng, policy.dist(h, state));
        let next_state = sample_categorical(&mut rng, model.transition(h, state, joint));
        steps.push(Step { state, joint, rewards: Vec::new(), next_state });
        state = next_state;
    }
    Ok(Trajectory { seed, stream, steps })
}

/// Rolls out episode `stream` of the run keyed by `seed`, with realized rewards.
pub fn sample_episode_stream<G: MarkovGame + ?Sized>(
    game: &G,
    policy: &CorrelatedPolicy,
    seed: u64,
    stream: u64,
) -> Result<Trajectory, GameError> {
    let mut traj = sample_path(game, policy, seed, stream)?;
    let mut rng = reward_rng(seed, stream);
    for (h, step) in traj.steps.iter_mut().enumerate() {
        step.rewards = (0..game.num_reward_tables())
            .map(|t| {
                let mean = game.reward_mean(t, h, step.state, step.joint);
                match game.reward_kind() {
                    RewardKind::Deterministic => mean,
                    RewardKind::Bernoulli => {
                        if rng.gen::<f64>() < mean {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            })
            .collect();
    }
    Ok(traj)
}

/// Rolls out one episode with realized rewards; deterministic given `seed`.
pub fn sample_episode<G: MarkovGame + ?Sized>(
    game: &G,
    policy: &CorrelatedPolicy,
    seed: u64,
) -> Result<Trajectory, GameError> {
    sample_episode_stream(game, policy, seed, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_model::{JointActionSpace, ZeroSumGame};

    fn uniform(game: &ZeroSumGame) -> CorrelatedPolicy {
        CorrelatedPolicy::uniform(game.horizon(), game.num_states(), game.joint_space().clone())
    }

    #[test]
    fn single_step_deterministic_reward() {
        let game = ZeroSumGame::from_fn(1, 1, 2, 2, 0, RewardKind::Deterministic, |_, _, _, _| vec![1.0], |_, _, _, _| 0.7)
            .unwrap();
        let t = sample_episode(&game, &uniform(&game), 3).unwrap();
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.steps[0].rewards, vec![0.7]);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let game = ZeroSumGame::from_fn(
            4,
            3,
            2,
            2,
            0,
            RewardKind::Bernoulli,
            |_, s, a, b| {
                let mut p = vec![0.2, 0.3, 0.5];
                p.rotate_left((s + a + b) % 3);
                p
            },
            |_, _, a, b| 0.3 + 0.1 * (a + b) as f64,
        )
        .unwrap();
        let pi = uniform(&game);
        assert_eq!(sample_episode(&game, &pi, 11).unwrap(), sample_episode(&game, &pi, 11).unwrap());
        let t = sample_episode(&game, &pi, 11).unwrap();
        for w in t.steps.windows(2) {
            assert_eq!(w[0].next_state, w[1].state);
        }
        assert!(t.steps.iter().all(|s| s.rewards[0] == 0.0 || s.rewards[0] == 1.0));
    }

    #[test]
    fn point_mass_transition() {
        let game = ZeroSumGame::from_fn(2, 2, 1, 1, 0, RewardKind::Deterministic, |_, _, _, _| vec![0.0, 1.0], |_, _, _, _| 0.0)
            .unwrap();
        for seed in 0..20 {
            let t = sample_episode(&game, &uniform(&game), seed).unwrap();
            assert_eq!(t.steps[0].next_state, 1);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let game = ZeroSumGame::from_fn(1, 1, 2, 2, 0, RewardKind::Deterministic, |_, _, _, _| vec![1.0], |_, _, _, _| 0.0)
            .unwrap();
        let pi = CorrelatedPolicy::uniform(1, 1, JointActionSpace::new(vec![3, 2]).unwrap());
        assert!(sample_episode(&game, &pi, 0).is_err());
    }

    #[test]
    fn empirical_transition_frequencies_match() {
        let p = 0.3;
        let game = ZeroSumGame::from_fn(1, 2, 1, 1, 0, RewardKind::Deterministic, |_, _, _, _| vec![p, 1.0 - p], |_, _, _, _| 0.0)
            .unwrap();
        let pi = uniform(&game);
        let n = 100_000u64;
        let hits = (0..n).filter(|&k| sample_path(&game, &pi, 5, k).unwrap().steps[0].next_state == 0).count() as f64;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - n as f64 * p).abs() <= 3.0 * sd, "hits {hits}");
    }
}
