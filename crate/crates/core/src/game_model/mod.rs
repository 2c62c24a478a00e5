//! Tabular Markov games, policies and the episode simulator.
//!
//! All indices are 0-based. Every table uses one flat layout: step-major, then
//! state, then joint action, then (for transitions) next state. For a game with
//! horizon `H`, `S` states and `J` joint actions the transition entry
//! `P_h(s' | s, a)` lives at `((h * S + s) * J + j) * S + s'` and the reward mean
//! `r_h(s, a)` at `(h * S + s) * J + j`.
//!
//! Joint actions are encoded mixed-radix with player 0 as the most significant
//! digit, so a two-player pair `(a, b)` maps to `a * B + b`.

mod io;
mod policy;
mod simulate;

pub use io::{AnyGame, GameFile, PolicyFile};
pub use policy::{marginalize, policy_expectation, CorrelatedPolicy, MarkovPolicy};
pub use simulate::{sample_categorical, sample_episode, sample_episode_stream, sample_path, Step, Trajectory};

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::GameError;

/// Tolerance used when checking that probability vectors sum to one.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// The realized reward equals its mean.
    Deterministic,
    /// The realized reward is a Bernoulli draw with the given mean.
    Bernoulli,
}

/// Mixed-radix encoding of joint actions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointActionSpace {
    counts: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl JointActionSpace {
    pub fn new(counts: Vec<usize>) -> Result<Self, GameError> {
        if counts.is_empty() {
            return Err(GameError::InvalidArgument("at least one player is required".into()));
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(GameError::InvalidArgument("every player needs at least one action".into()));
        }
        let mut strides = vec![1usize; counts.len()];
        for i in (0..counts.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1]
                .checked_mul(counts[i + 1])
                .ok_or_else(|| GameError::InvalidArgument("joint action space overflows".into()))?;
        }
        let size = strides[0]
            .checked_mul(counts[0])
            .ok_or_else(|| GameError::InvalidArgument("joint action space overflows".into()))?;
        Ok(JointActionSpace { counts, strides, size })
    }

    pub fn num_players(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn count(&self, player: usize) -> usize {
        self.counts[player]
    }

    /// Number of joint actions, the product of the per-player counts.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn encode(&self, actions: &[usize]) -> usize {
        debug_assert_eq!(actions.len(), self.counts.len());
        actions.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn decode(&self, joint: usize) -> Vec<usize> {
        (0..self.counts.len()).map(|i| self.action_of(joint, i)).collect()
    }

    #[inline]
    pub fn action_of(&self, joint: usize, player: usize) -> usize {
        (joint / self.strides[player]) % self.counts[player]
    }

    /// The joint action with `player`'s component replaced by `action`.
    #[inline]
    pub fn with_action(&self, joint: usize, player: usize, action: usize) -> usize {
        let current = self.action_of(joint, player);
        joint - current * self.strides[player] + action * self.strides[player]
    }

    /// Index of the joint action of all players except `player`, in the
    /// mixed-radix space of the remaining players.
    pub fn others_index(&self, joint: usize, player: usize) -> usize {
        let mut idx = 0;
        for i in 0..self.counts.len() {
            if i != player {
                idx = idx * self.counts[i] + self.action_of(joint, i);
            }
        }
        idx
    }

    /// Number of joint actions of all players except `player`.
    pub fn others_size(&self, player: usize) -> usize {
        self.size / self.counts[player]
    }
}

/// Read access to the transition kernel of a tabular episodic model.
pub trait TransitionModel {
    fn horizon(&self) -> usize;
    fn num_states(&self) -> usize;
    fn initial_state(&self) -> usize;
    fn joint_space(&self) -> &JointActionSpace;
    /// Distribution over next states for `(h, s, joint)`.
    fn transition(&self, h: usize, s: usize, joint: usize) -> &[f64];

    fn num_joint(&self) -> usize {
        self.joint_space().size()
    }

    /// `[P_h V](s, a)` for every state and joint action, laid out state-major.
    fn transition_apply(&self, h: usize, v: &[f64]) -> Vec<f64> {
        let (ns, nj) = (self.num_states(), self.num_joint());
        assert_eq!(v.len(), ns, "value vector must have one entry per state");
        let mut out = Vec::with_capacity(ns * nj);
        for s in 0..ns {
            for j in 0..nj {
                out.push(dot(self.transition(h, s, j), v));
            }
        }
        out
    }
}

/// A tabular Markov game: transitions plus per-player payoffs.
pub trait MarkovGame: TransitionModel {
    fn reward_kind(&self) -> RewardKind;

    /// Number of stored reward tables (1 for a zero-sum game, `m` otherwise).
    fn num_reward_tables(&self) -> usize;

    fn reward_mean(&self, table: usize, h: usize, s: usize, joint: usize) -> f64;

    /// Expected payoff that `player` maximizes. In a zero-sum game the second
    /// player's payoff is the negated reward of the first.
    fn utility(&self, player: usize, h: usize, s: usize, joint: usize) -> f64;

    fn num_players(&self) -> usize {
        self.joint_space().num_players()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// First invariant breach found by `validate`.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    InitialState { initial_state: usize, num_states: usize },
    TransitionEntry { h: usize, s: usize, actions: Vec<usize>, next: usize, value: f64 },
    TransitionSum { h: usize, s: usize, actions: Vec<usize>, sum: f64 },
    RewardRange { player: usize, h: usize, s: usize, actions: Vec<usize>, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InitialState { initial_state, num_states } => {
                write!(f, "initial state {initial_state} out of range for {num_states} states")
            }
            Violation::TransitionEntry { h, s, actions, next, value } => write!(
                f,
                "transition entry at (h={h}, s={s}, a={actions:?}, s'={next}) is {value}, not a probability"
            ),
            Violation::TransitionSum { h, s, actions, sum } => write!(
                f,
                "transition row at (h={h}, s={s}, a={actions:?}) sums to {sum}, not 1"
            ),
            Violation::RewardRange { player, h, s, actions, value } => write!(
                f,
                "reward out of [0,1] for player {player} at (h={h}, s={s}, a={actions:?}): {value}"
            ),
        }
    }
}

fn validate_model<M: MarkovGame + ?Sized>(game: &M) -> Result<(), Violation> {
    let (nh, ns, space) = (game.horizon(), game.num_states(), game.joint_space());
    if game.initial_state() >= ns {
        return Err(Violation::InitialState { initial_state: game.initial_state(), num_states: ns });
    }
    for h in 0..nh {
        for s in 0..ns {
            for j in 0..space.size() {
                let row = game.transition(h, s, j);
                for (next, &p) in row.iter().enumerate() {
                    if !(p.is_finite() && p >= 0.0) {
                        return Err(Violation::TransitionEntry { h, s, actions: space.decode(j), next, value: p });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(Violation::TransitionSum { h, s, actions: space.decode(j), sum });
                }
            }
        }
    }
    for player in 0..game.num_reward_tables() {
        for h in 0..nh {
            for s in 0..ns {
                for j in 0..space.size() {
                    let r = game.reward_mean(player, h, s, j);
                    if !(0.0..=1.0).contains(&r) {
                        return Err(Violation::RewardRange { player, h, s, actions: space.decode(j), value: r });
                    }
                }
            }
        }
    }
    Ok(())
}

fn check_len(what: &str, got: usize, want: usize) -> Result<(), GameError> {
    if got != want {
        return Err(GameError::Dimension(format!("{what}: expected {want} entries, got {got}")));
    }
    Ok(())
}

/// Two-player zero-sum game; the reward is the max-player's gain.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroSumGame {
    horizon: usize,
    num_states: usize,
    space: JointActionSpace,
    initial_state: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    reward_kind: RewardKind,
}

impl ZeroSumGame {
    /// Builds a game from flat tables in the documented layout. Only shapes are
    /// checked here; value invariants are reported by [`ZeroSumGame::validate`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        horizon: usize,
        num_states: usize,
        num_actions_max: usize,
        num_actions_min: usize,
        initial_state: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        reward_kind: RewardKind,
    ) -> Result<Self, GameError> {
        if horizon == 0 || num_states == 0 {
            return Err(GameError::InvalidArgument("horizon and state count must be positive".into()));
        }
        let space = JointActionSpace::new(vec![num_actions_max, num_actions_min])?;
        let cells = horizon * num_states * space.size();
        check_len("transition table", transition.len(), cells * num_states)?;
        check_len("reward table", reward.len(), cells)?;
        Ok(ZeroSumGame { horizon, num_states, space, initial_state, transition, reward, reward_kind })
    }

    /// Builds a game from closures over `(h, s, a, b)`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fn(
        horizon: usize,
        num_states: usize,
        num_actions_max: usize,
        num_actions_min: usize,
        initial_state: usize,
        reward_kind: RewardKind,
        mut transition: impl FnMut(usize, usize, usize, usize) -> Vec<f64>,
        mut reward: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self, GameError> {
        let mut p = Vec::new();
        let mut r = Vec::new();
        for h in 0..horizon {
            for s in 0..num_states {
                for a in 0..num_actions_max {
                    for b in 0..num_actions_min {
                        let row = transition(h, s, a, b);
                        check_len("transition row", row.len(), num_states)?;
                        p.extend(row);
                        r.push(reward(h, s, a, b));
                    }
                }
            }
        }
        Self::new(horizon, num_states, num_actions_max, num_actions_min, initial_state, p, r, reward_kind)
    }

    pub fn validate(&self) -> Result<(), Violation> {
        validate_model(self)
    }

    pub fn num_actions_max(&self) -> usize {
        self.space.count(0)
    }

    pub fn num_actions_min(&self) -> usize {
        self.space.count(1)
    }

    /// Reward mean `r_h(s, a, b)`.
    pub fn reward(&self, h: usize, s: usize, a: usize, b: usize) -> f64 {
        self.reward[self.cell(h, s, self.space.encode(&[a, b]))]
    }

    /// The flat reward table.
    pub fn reward_table(&self) -> &[f64] {
        &self.reward
    }

    pub fn transition_table(&self) -> &[f64] {
        &self.transition
    }

    /// The reward matrix at `(h, s)`, row-major `A x B`.
    pub fn reward_matrix(&self, h: usize, s: usize) -> &[f64] {
        let j = self.space.size();
        let start = self.cell(h, s, 0);
        &self.reward[start..start + j]
    }

    pub fn with_reward_kind(mut self, kind: RewardKind) -> Self {
        self.reward_kind = kind;
        self
    }

    /// The same dynamics with a different reward table.
    pub fn with_rewards(&self, reward: Vec<f64>) -> Result<Self, GameError> {
        check_len("reward table", reward.len(), self.reward.len())?;
        Ok(ZeroSumGame { reward, ..self.clone() })
    }

    /// A transition-only view of this game.
    pub fn dynamics(&self) -> Dynamics {
        Dynamics {
            horizon: self.horizon,
            num_states: self.num_states,
            space: self.space.clone(),
            initial_state: self.initial_state,
            transition: self.transition.clone(),
        }
    }

    /// The game as a two-player general-sum game with payoffs `(r, 1 - r)`.
    pub fn to_general_sum(&self) -> GeneralSumGame {
        GeneralSumGame {
            horizon: self.horizon,
            num_states: self.num_states,
            space: self.space.clone(),
            initial_state: self.initial_state,
            transition: self.transition.clone(),
            rewards: vec![self.reward.clone(), self.reward.iter().map(|r| 1.0 - r).collect()],
            reward_kind: self.reward_kind,
        }
    }

    #[inline]
    fn cell(&self, h: usize, s: usize, j: usize) -> usize {
        (h * self.num_states + s) * self.space.size() + j
    }
}

impl TransitionModel for ZeroSumGame {
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
    #[inline]
    fn transition(&self, h: usize, s: usize, joint: usize) -> &[f64] {
        let start = self.cell(h, s, joint) * self.num_states;
        &self.transition[start..start + self.num_states]
    }
}

impl MarkovGame for ZeroSumGame {
    fn reward_kind(&self) -> RewardKind {
        self.reward_kind
    }
    fn num_reward_tables(&self) -> usize {
        1
    }
    #[inline]
    fn reward_mean(&self, _table: usize, h: usize, s: usize, joint: usize) -> f64 {
        self.reward[self.cell(h, s, joint)]
    }
    #[inline]
    fn utility(&self, player: usize, h: usize, s: usize, joint: usize) -> f64 {
        let r = self.reward[self.cell(h, s, joint)];
        if player == 0 {
            r
        } else {
            -r
        }
    }
}

/// An `m`-player general-sum game with one reward table per player.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralSumGame {
    horizon: usize,
    num_states: usize,
    space: JointActionSpace,
    initial_state: usize,
    transition: Vec<f64>,
    rewards: Vec<Vec<f64>>,
    reward_kind: RewardKind,
}

impl GeneralSumGame {
    pub fn new(
        horizon: usize,
        num_states: usize,
        action_counts: Vec<usize>,
        initial_state: usize,
        transition: Vec<f64>,
        rewards: Vec<Vec<f64>>,
        reward_kind: RewardKind,
    ) -> Result<Self, GameError> {
        if horizon == 0 || num_states == 0 {
            return Err(GameError::InvalidArgument("horizon and state count must be positive".into()));
        }
        let space = JointActionSpace::new(action_counts)?;
        let cells = horizon * num_states * space.size();
        check_len("transition table", transition.len(), cells * num_states)?;
        check_len("reward tables", rewards.len(), space.num_players())?;
        for r in &rewards {
            check_len("reward table", r.len(), cells)?;
        }
        Ok(GeneralSumGame { horizon, num_states, space, initial_state, transition, rewards, reward_kind })
    }

    pub fn validate(&self) -> Result<(), Violation> {
        validate_model(self)
    }

    pub fn action_counts(&self) -> &[usize] {
        self.space.counts()
    }

    pub fn reward_tables(&self) -> &[Vec<f64>] {
        &self.rewards
    }

    pub fn transition_table(&self) -> &[f64] {
        &self.transition
    }

    pub fn with_reward_kind(mut self, kind: RewardKind) -> Self {
        self.reward_kind = kind;
        self
    }

    /// The same dynamics with different per-player reward tables.
    pub fn with_rewards(&self, rewards: Vec<Vec<f64>>) -> Result<Self, GameError> {
        check_len("reward tables", rewards.len(), self.rewards.len())?;
        for r in &rewards {
            check_len("reward table", r.len(), self.rewards[0].len())?;
        }
        Ok(GeneralSumGame { rewards, ..self.clone() })
    }

    pub fn dynamics(&self) -> Dynamics {
        Dynamics {
            horizon: self.horizon,
            num_states: self.num_states,
            space: self.space.clone(),
            initial_state: self.initial_state,
            transition: self.transition.clone(),
        }
    }

    #[inline]
    fn cell(&self, h: usize, s: usize, j: usize) -> usize {
        (h * self.num_states + s) * self.space.size() + j
    }
}

impl TransitionModel for GeneralSumGame {
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
    #[inline]
    fn transition(&self, h: usize, s: usize, joint: usize) -> &[f64] {
        let start = self.cell(h, s, joint) * self.num_states;
        &self.transition[start..start + self.num_states]
    }
}

impl MarkovGame for GeneralSumGame {
    fn reward_kind(&self) -> RewardKind {
        self.reward_kind
    }
    fn num_reward_tables(&self) -> usize {
        self.rewards.len()
    }
    #[inline]
    fn reward_mean(&self, table: usize, h: usize, s: usize, joint: usize) -> f64 {
        self.rewards[table][self.cell(h, s, joint)]
    }
    #[inline]
    fn utility(&self, player: usize, h: usize, s: usize, joint: usize) -> f64 {
        self.rewards[player][self.cell(h, s, joint)]
    }
}

/// Transitions of a game without any reward information. Reward-free
/// exploration only ever sees this view.
#[derive(Clone, Debug, PartialEq)]
pub struct Dynamics {
    horizon: usize,
    num_states: usize,
    space: JointActionSpace,
    initial_state: usize,
    transition: Vec<f64>,
}

impl Dynamics {
    pub fn new(
        horizon: usize,
        num_states: usize,
        action_counts: Vec<usize>,
        initial_state: usize,
        transition: Vec<f64>,
    ) -> Result<Self, GameError> {
        let space = JointActionSpace::new(action_counts)?;
        check_len("transition table", transition.len(), horizon * num_states * space.size() * num_states)?;
        Ok(Dynamics { horizon, num_states, space, initial_state, transition })
    }

    pub fn transition_table(&self) -> &[f64] {
        &self.transition
    }
}

impl TransitionModel for Dynamics {
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
    #[inline]
    fn transition(&self, h: usize, s: usize, joint: usize) -> &[f64] {
        let start = ((h * self.num_states + s) * self.space.size() + joint) * self.num_states;
        &self.transition[start..start + self.num_states]
    }
}

/// `[P_h V](s, a)` for every `(s, joint)`; free-function form of
/// [`TransitionModel::transition_apply`].
pub fn transition_apply<M: TransitionModel + ?Sized>(model: &M, h: usize, v: &[f64]) -> Vec<f64> {
    model.transition_apply(h, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_state_game(p: [f64; 2], r: f64) -> ZeroSumGame {
        ZeroSumGame::from_fn(1, 2, 1, 1, 0, RewardKind::Deterministic, |_, _, _, _| p.to_vec(), |_, _, _, _| r)
            .unwrap()
    }

    #[test]
    fn joint_encoding_is_row_major() {
        let space = JointActionSpace::new(vec![2, 3]).unwrap();
        assert_eq!(space.size(), 6);
        assert_eq!(space.encode(&[1, 2]), 5);
        assert_eq!(space.decode(4), vec![1, 1]);
        assert_eq!(space.with_action(4, 0, 0), 1);
        assert_eq!(space.others_index(5, 0), 2);
        assert_eq!(space.others_index(5, 1), 1);
    }

    proptest! {
        #[test]
        fn joint_decode_inverts_encode(counts in prop::collection::vec(1usize..5, 1..5), seed in any::<u64>()) {
            let space = JointActionSpace::new(counts).unwrap();
            let joint = (seed as usize) % space.size();
            prop_assert_eq!(space.encode(&space.decode(joint)), joint);
            for p in 0..space.num_players() {
                for a in 0..space.count(p) {
                    let k = space.with_action(joint, p, a);
                    prop_assert_eq!(space.action_of(k, p), a);
                    prop_assert_eq!(space.others_index(k, p), space.others_index(joint, p));
                }
            }
        }

        #[test]
        fn transition_apply_is_linear(
            p in prop::collection::vec(0.01f64..1.0, 3),
            v1 in prop::collection::vec(-5.0f64..5.0, 3),
            v2 in prop::collection::vec(-5.0f64..5.0, 3),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let total: f64 = p.iter().sum();
            let row: Vec<f64> = p.iter().map(|x| x / total).collect();
            let game = ZeroSumGame::from_fn(1, 3, 2, 1, 0, RewardKind::Deterministic, |_, _, _, _| row.clone(), |_, _, _, _| 0.5).unwrap();
            let mix: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = game.transition_apply(0, &mix);
            let r1 = game.transition_apply(0, &v1);
            let r2 = game.transition_apply(0, &v2);
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (alpha * r1[i] + beta * r2[i])).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn validate_reports_unnormalized_row() {
        let game = two_state_game([0.5, 0.49], 0.5);
        match game.validate() {
            Err(Violation::TransitionSum { h: 0, s: 0, actions, sum }) => {
                assert_eq!(actions, vec![0, 0]);
                assert!((sum - 0.99).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_reports_reward_out_of_range() {
        let game = two_state_game([0.5, 0.5], 1.2);
        let v = game.validate().unwrap_err();
        assert!(matches!(v, Violation::RewardRange { .. }));
        assert!(v.to_string().contains("reward out of [0,1]"));
    }

    #[test]
    fn validate_accepts_well_formed_game() {
        assert_eq!(two_state_game([0.25, 0.75], 1.0).validate(), Ok(()));
    }

    #[test]
    fn transition_apply_examples() {
        let game = two_state_game([0.25, 0.75], 0.0);
        assert_eq!(game.transition_apply(0, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(game.transition_apply(0, &[4.0, 0.0]), vec![1.0, 1.0]);
        let point = two_state_game([0.0, 1.0], 0.0);
        assert_eq!(point.transition_apply(0, &[3.0, 7.5]), vec![7.5, 7.5]);
    }

    #[test]
    fn shape_errors_are_reported() {
        assert!(ZeroSumGame::new(1, 1, 1, 1, 0, vec![1.0, 0.0], vec![0.0], RewardKind::Deterministic).is_err());
        assert!(GeneralSumGame::new(1, 1, vec![1, 1], 0, vec![1.0], vec![vec![0.0]], RewardKind::Deterministic).is_err());
    }
}
