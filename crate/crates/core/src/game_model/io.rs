//! JSON game and policy documents.
//!
//! A game document holds `transition[h][s][joint][s']` and
//! `rewards[table][h][s][joint]`, with joint actions flattened as described in
//! the module docs. Zero-sum games carry a single reward table (the
//! max-player's gain); general-sum games carry one per player. Floats are
//! written in shortest round-trip form, so load(save(g)) == g bit for bit.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::GameError;

use super::{
    CorrelatedPolicy, GeneralSumGame, JointActionSpace, MarkovPolicy, RewardKind, TransitionModel, ZeroSumGame,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameFile {
    pub horizon: usize,
    pub num_states: usize,
    pub zero_sum: bool,
    pub players: usize,
    pub action_counts: Vec<usize>,
    pub initial_state: usize,
    pub transition: Vec<Vec<Vec<Vec<f64>>>>,
    pub rewards: Vec<Vec<Vec<Vec<f64>>>>,
    pub reward_kind: RewardKind,
}

/// Either kind of game, as loaded from a file.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyGame {
    ZeroSum(ZeroSumGame),
    GeneralSum(GeneralSumGame),
}

fn nest(flat: &[f64], dims: &[usize]) -> Vec<Vec<Vec<f64>>> {
    let (a, b, c) = (dims[0], dims[1], dims[2]);
    (0..a)
        .map(|i| (0..b).map(|k| flat[(i * b + k) * c..(i * b + k + 1) * c].to_vec()).collect())
        .collect()
}

fn flatten3(t: &[Vec<Vec<f64>>], dims: [usize; 3], what: &str) -> Result<Vec<f64>, GameError> {
    let mut out = Vec::with_capacity(dims.iter().product());
    if t.len() != dims[0] {
        return Err(GameError::Dimension(format!("{what}: expected {} steps, got {}", dims[0], t.len())));
    }
    for per_h in t {
        if per_h.len() != dims[1] {
            return Err(GameError::Dimension(format!("{what}: expected {} states", dims[1])));
        }
        for row in per_h {
            if row.len() != dims[2] {
                return Err(GameError::Dimension(format!("{what}: expected {} entries per row", dims[2])));
            }
            out.extend_from_slice(row);
        }
    }
    Ok(out)
}

impl GameFile {
    fn from_parts(
        model: &impl TransitionModel,
        zero_sum: bool,
        tables: &[&[f64]],
        kind: RewardKind,
    ) -> GameFile {
        let (nh, ns, nj) = (model.horizon(), model.num_states(), model.num_joint());
        let transition = (0..nh)
            .map(|h| {
                (0..ns)
                    .map(|s| (0..nj).map(|j| model.transition(h, s, j).to_vec()).collect())
                    .collect()
            })
            .collect();
        GameFile {
            horizon: nh,
            num_states: ns,
            zero_sum,
            players: model.joint_space().num_players(),
            action_counts: model.joint_space().counts().to_vec(),
            initial_state: model.initial_state(),
            transition,
            rewards: tables.iter().map(|t| nest(t, &[nh, ns, nj])).collect(),
            reward_kind: kind,
        }
    }

    pub fn from_zero_sum(game: &ZeroSumGame) -> GameFile {
        use super::MarkovGame;
        Self::from_parts(game, true, &[game.reward_table()], game.reward_kind())
    }

    pub fn from_general_sum(game: &GeneralSumGame) -> GameFile {
        use super::MarkovGame;
        let tables: Vec<&[f64]> = game.reward_tables().iter().map(|t| t.as_slice()).collect();
        Self::from_parts(game, false, &tables, game.reward_kind())
    }

    pub fn from_game(game: &AnyGame) -> GameFile {
        match game {
            AnyGame::ZeroSum(g) => Self::from_zero_sum(g),
            AnyGame::GeneralSum(g) => Self::from_general_sum(g),
        }
    }

    pub fn into_game(self) -> Result<AnyGame, GameError> {
        let space = JointActionSpace::new(self.action_counts.clone())?;
        if space.num_players() != self.players {
            return Err(GameError::Dimension(format!(
                "players = {} but {} action counts given",
                self.players,
                space.num_players()
            )));
        }
        let nj = space.size();
        let (nh, ns) = (self.horizon, self.num_states);
        let mut transition = Vec::with_capacity(nh * ns * nj * ns);
        if self.transition.len() != nh {
            return Err(GameError::Dimension("transition: wrong number of steps".into()));
        }
        for per_h in &self.transition {
            transition.extend(flatten3(per_h, [ns, nj, ns], "transition")?);
        }
        let rewards = self
            .rewards
            .iter()
            .map(|t| flatten3(t, [nh, ns, nj], "rewards"))
            .collect::<Result<Vec<_>, _>>()?;
        if self.zero_sum {
            if self.players != 2 || rewards.len() != 1 {
                return Err(GameError::Dimension("zero-sum games need 2 players and one reward table".into()));
            }
            let (a, b) = (space.count(0), space.count(1));
            let reward = rewards.into_iter().next().unwrap_or_default();
            Ok(AnyGame::ZeroSum(ZeroSumGame::new(
                nh,
                ns,
                a,
                b,
                self.initial_state,
                transition,
                reward,
                self.reward_kind,
            )?))
        } else {
            Ok(AnyGame::GeneralSum(GeneralSumGame::new(
                nh,
                ns,
                self.action_counts,
                self.initial_state,
                transition,
                rewards,
                self.reward_kind,
            )?))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("game documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<GameFile, GameError> {
        serde_json::from_str(text).map_err(|e| GameError::InvalidArgument(format!("game document: {e}")))
    }

    pub fn load(path: &Path) -> Result<AnyGame, GameError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GameError::InvalidArgument(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text)?.into_game()
    }

    pub fn save(&self, path: &Path) -> Result<(), GameError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| GameError::InvalidArgument(format!("writing {}: {e}", path.display())))
    }
}

/// Policy documents: either one correlated table or a list of per-player factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyFile {
    /// `dist[h][s][joint]`.
    Correlated { action_counts: Vec<usize>, dist: Vec<Vec<Vec<f64>>> },
    /// `factors[player][h][s][action]`.
    Product { factors: Vec<Vec<Vec<Vec<f64>>>> },
}

impl PolicyFile {
    pub fn from_correlated(policy: &CorrelatedPolicy) -> PolicyFile {
        let nj = policy.joint_space().size();
        PolicyFile::Correlated {
            action_counts: policy.joint_space().counts().to_vec(),
            dist: nest(policy.table(), &[policy.horizon(), policy.num_states(), nj]),
        }
    }

    pub fn from_product(factors: &[MarkovPolicy]) -> PolicyFile {
        PolicyFile::Product {
            factors: factors
                .iter()
                .map(|f| nest(f.table(), &[f.horizon(), f.num_states(), f.num_actions()]))
                .collect(),
        }
    }

    pub fn into_policy(self) -> Result<CorrelatedPolicy, GameError> {
        match self {
            PolicyFile::Correlated { action_counts, dist } => {
                let space = JointActionSpace::new(action_counts)?;
                let nh = dist.len();
                let ns = dist.first().map_or(0, |d| d.len());
                let flat = flatten3(&dist, [nh, ns, space.size()], "policy")?;
                CorrelatedPolicy::new(nh, ns, space, flat)
            }
            PolicyFile::Product { factors } => {
                let policies = factors
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        let nh = f.len();
                        let ns = f.first().map_or(0, |d| d.len());
                        let na = f.first().and_then(|d| d.first()).map_or(0, |r| r.len());
                        MarkovPolicy::new(i, nh, ns, na, flatten3(f, [nh, ns, na], "policy factor")?)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                CorrelatedPolicy::product(&policies)
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<PolicyFile, GameError> {
        serde_json::from_str(text).map_err(|e| GameError::InvalidArgument(format!("policy document: {e}")))
    }
}
