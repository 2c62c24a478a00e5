//! Seeded random games and the lower-bound hard families.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::GameError;
use crate::game_model::{GeneralSumGame, JointActionSpace, RewardKind, ZeroSumGame};
use crate::matrix_equilibrium::Matrix;
use crate::rng::tagged_rng;

const INSTANCE_TAG: u64 = 0x1257_a7ce;

/// Random probability vector over `n` outcomes with `support` nonzero entries:
/// Exp(1) weights on a uniformly chosen support, normalized.
fn random_row(rng: &mut ChaCha8Rng, n: usize, support: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    for i in sample(rng, n, support.min(n)).into_iter() {
        // 1 - u lies in (0, 1]
        row[i] = -(1.0 - rng.gen::<f64>()).ln();
    }
    let total: f64 = row.iter().sum();
    if total > 0.0 {
        row.iter_mut().for_each(|p| *p /= total);
    } else {
        // every drawn weight was exactly zero
        row[0] = 1.0;
    }
    row
}

fn check_sparsity(sparsity: Option<usize>, num_states: usize) -> Result<usize, GameError> {
    match sparsity {
        None => Ok(num_states),
        Some(0) => Err(GameError::InvalidArgument("sparsity must be at least 1".into())),
        Some(k) => Ok(k.min(num_states)),
    }
}

fn random_transitions(rng: &mut ChaCha8Rng, cells: usize, num_states: usize, support: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(cells * num_states);
    for _ in 0..cells {
        p.extend(random_row(rng, num_states, support));
    }
    p
}

fn random_rewards(rng: &mut ChaCha8Rng, cells: usize) -> Vec<f64> {
    (0..cells).map(|_| rng.gen::<f64>()).collect()
}

/// Random zero-sum game with uniform[0, 1] rewards. Each transition row puts
/// Exp(1)-weighted mass on `sparsity` random successors (all states when `None`).
pub fn random_zero_sum(
    num_states: usize,
    num_actions_max: usize,
    num_actions_min: usize,
    horizon: usize,
    seed: u64,
    sparsity: Option<usize>,
) -> Result<ZeroSumGame, GameError> {
    if num_states == 0 || num_actions_max == 0 || num_actions_min == 0 || horizon == 0 {
        return Err(GameError::InvalidArgument("sizes must be positive".into()));
    }
    let support = check_sparsity(sparsity, num_states)?;
    let mut rng = tagged_rng(seed, INSTANCE_TAG);
    let cells = horizon * num_states * num_actions_max * num_actions_min;
    let transition = random_transitions(&mut rng, cells, num_states, support);
    let reward = random_rewards(&mut rng, cells);
    ZeroSumGame::new(horizon, num_states, num_actions_max, num_actions_min, 0, transition, reward, RewardKind::Deterministic)
}

/// Random general-sum game; with `constant_sum` (two players only) the second
/// player's reward is `1 − r₁`.
pub fn random_general_sum(
    num_states: usize,
    action_counts: &[usize],
    horizon: usize,
    seed: u64,
    sparsity: Option<usize>,
    constant_sum: bool,
) -> Result<GeneralSumGame, GameError> {
    if num_states == 0 || horizon == 0 {
        return Err(GameError::InvalidArgument("sizes must be positive".into()));
    }
    if constant_sum && action_counts.len() != 2 {
        return Err(GameError::InvalidArgument("constant-sum games have two players".into()));
    }
    let space = JointActionSpace::new(action_counts.to_vec())?;
    let support = check_sparsity(sparsity, num_states)?;
    let mut rng = tagged_rng(seed, INSTANCE_TAG);
    let cells = horizon * num_states * space.size();
    let transition = random_transitions(&mut rng, cells, num_states, support);
    let rewards = if constant_sum {
        let r = random_rewards(&mut rng, cells);
        let other = r.iter().map(|x| 1.0 - x).collect();
        vec![r, other]
    } else {
        (0..space.num_players()).map(|_| random_rewards(&mut rng, cells)).collect()
    };
    GeneralSumGame::new(horizon, num_states, action_counts.to_vec(), 0, transition, rewards, RewardKind::Deterministic)
}

/// Uniform[0, 1] reward table of `cells` entries, keyed by `(seed, task)`.
pub fn random_reward_table(cells: usize, seed: u64, task: u64) -> Vec<f64> {
    let mut rng = tagged_rng(seed, INSTANCE_TAG ^ (task.wrapping_add(1) << 32));
    random_rewards(&mut rng, cells)
}

fn check_eps(eps: f64) -> Result<(), GameError> {
    if eps > 0.0 && eps <= 0.5 {
        Ok(())
    } else {
        Err(GameError::InvalidArgument(format!("eps must lie in (0, 1/2], got {eps}")))
    }
}

/// Mean matrix of the hard Bernoulli matrix game:
/// `M_ab = 1/2 + (1 − 2·1{a ≠ a* and b = b*}) ε`.
pub fn hard_matrix(num_actions_max: usize, num_actions_min: usize, a_star: usize, b_star: usize, eps: f64) -> Result<Matrix, GameError> {
    check_eps(eps)?;
    if a_star >= num_actions_max || b_star >= num_actions_min {
        return Err(GameError::InvalidArgument(format!(
            "planted pair ({a_star}, {b_star}) outside {num_actions_max}x{num_actions_min}"
        )));
    }
    let mut data = Vec::with_capacity(num_actions_max * num_actions_min);
    for a in 0..num_actions_max {
        for b in 0..num_actions_min {
            let sign = if a != a_star && b == b_star { -1.0 } else { 1.0 };
            data.push(0.5 + sign * eps);
        }
    }
    Matrix::new(num_actions_max, num_actions_min, data).map_err(|e| GameError::InvalidArgument(e.to_string()))
}

/// Hard Markov game with Bernoulli rewards.
///
/// The result has `num_states + 1` states and horizon `horizon + 1`. State 0
/// is the fixed initial state; states `1..=num_states` are the planted states.
/// Step 0 pays nothing and moves uniformly to a planted state; at step
/// `h + 1` planted state `i + 1` plays `hard_matrix(a_star[h][i], b_star[h][i], eps / horizon)`
/// and moves uniformly again. State 0 is unreachable after step 0 and pays 0.
pub fn hard_markov_game(
    num_states: usize,
    num_actions_max: usize,
    num_actions_min: usize,
    horizon: usize,
    a_star: &[Vec<usize>],
    b_star: &[Vec<usize>],
    eps: f64,
) -> Result<ZeroSumGame, GameError> {
    check_eps(eps)?;
    if num_states == 0 || horizon == 0 {
        return Err(GameError::InvalidArgument("sizes must be positive".into()));
    }
    let shaped = |t: &[Vec<usize>]| t.len() == horizon && t.iter().all(|row| row.len() == num_states);
    if !shaped(a_star) || !shaped(b_star) {
        return Err(GameError::Dimension(format!("planted tables must be {horizon}x{num_states}")));
    }
    let mut blocks = Vec::with_capacity(horizon * num_states);
    for h in 0..horizon {
        for i in 0..num_states {
            blocks.push(hard_matrix(num_actions_max, num_actions_min, a_star[h][i], b_star[h][i], eps / horizon as f64)?);
        }
    }
    let total_states = num_states + 1;
    let mut uniform = vec![1.0 / num_states as f64; total_states];
    uniform[0] = 0.0;
    ZeroSumGame::from_fn(
        horizon + 1,
        total_states,
        num_actions_max,
        num_actions_min,
        0,
        RewardKind::Bernoulli,
        |_, _, _, _| uniform.clone(),
        |h, s, a, b| {
            if h == 0 || s == 0 {
                0.0
            } else {
                blocks[(h - 1) * num_states + (s - 1)].get(a, b)
            }
        },
    )
}
