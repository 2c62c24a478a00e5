use crate::error::GameError;

use super::{JointActionSpace, NORMALIZATION_TOL};

fn check_simplex(v: &[f64]) -> Result<(), String> {
    if let Some((i, p)) = v.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
        return Err(format!("entry {i} is {p}"));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

/// Per-step, per-state action distribution of a single player.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovPolicy {
    player: usize,
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl MarkovPolicy {
    pub fn new(
        player: usize,
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        probs: Vec<f64>,
    ) -> Result<Self, GameError> {
        if probs.len() != horizon * num_states * num_actions {
            return Err(GameError::Dimension(format!(
                "policy table needs {} entries, got {}",
                horizon * num_states * num_actions,
                probs.len()
            )));
        }
        Ok(MarkovPolicy { player, horizon, num_states, num_actions, probs })
    }

    pub fn uniform(player: usize, horizon: usize, num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        MarkovPolicy { player, horizon, num_states, num_actions, probs: vec![p; horizon * num_states * num_actions] }
    }

    /// Deterministic policy playing `choice(h, s)`.
    pub fn deterministic(
        player: usize,
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        mut choice: impl FnMut(usize, usize) -> usize,
    ) -> Self {
        let mut probs = vec![0.0; horizon * num_states * num_actions];
        for h in 0..horizon {
            for s in 0..num_states {
                probs[(h * num_states + s) * num_actions + choice(h, s)] = 1.0;
            }
        }
        MarkovPolicy { player, horizon, num_states, num_actions, probs }
    }

    pub fn player(&self) -> usize {
        self.player
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn num_states(&self) -> usize {
        self.num_states
    }
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn dist(&self, h: usize, s: usize) -> &[f64] {
        let start = (h * self.num_states + s) * self.num_actions;
        &self.probs[start..start + self.num_actions]
    }

    pub fn set_dist(&mut self, h: usize, s: usize, dist: &[f64]) {
        let start = (h * self.num_states + s) * self.num_actions;
        self.probs[start..start + self.num_actions].copy_from_slice(dist);
    }

    pub fn table(&self) -> &[f64] {
        &self.probs
    }

    pub fn validate(&self) -> Result<(), GameError> {
        for h in 0..self.horizon {
            for s in 0..self.num_states {
                check_simplex(self.dist(h, s))
                    .map_err(|e| GameError::InvalidArgument(format!("policy at (h={h}, s={s}) {e}")))?;
            }
        }
        Ok(())
    }
}

/// Per-step, per-state distribution over joint actions.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatedPolicy {
    horizon: usize,
    num_states: usize,
    space: JointActionSpace,
    probs: Vec<f64>,
}

impl CorrelatedPolicy {
    pub fn new(
        horizon: usize,
        num_states: usize,
        space: JointActionSpace,
        probs: Vec<f64>,
    ) -> Result<Self, GameError> {
        if probs.len() != horizon * num_states * space.size() {
            return Err(GameError::Dimension(format!(
                "correlated policy needs {} entries, got {}",
                horizon * num_states * space.size(),
                probs.len()
            )));
        }
        Ok(CorrelatedPolicy { horizon, num_states, space, probs })
    }

    pub fn uniform(horizon: usize, num_states: usize, space: JointActionSpace) -> Self {
        let p = 1.0 / space.size() as f64;
        let n = horizon * num_states * space.size();
        CorrelatedPolicy { horizon, num_states, space, probs: vec![p; n] }
    }

    /// The product of independent per-player policies, in player order.
    pub fn product(factors: &[MarkovPolicy]) -> Result<Self, GameError> {
        let first = factors.first().ok_or_else(|| GameError::InvalidArgument("no factors".into()))?;
        let (horizon, num_states) = (first.horizon, first.num_states);
        if factors.iter().any(|f| f.horizon != horizon || f.num_states != num_states) {
            return Err(GameError::Dimension("factor policies disagree on horizon or states".into()));
        }
        let space = JointActionSpace::new(factors.iter().map(|f| f.num_actions).collect())?;
        let mut probs = Vec::with_capacity(horizon * num_states * space.size());
        for h in 0..horizon {
            for s in 0..num_states {
                for j in 0..space.size() {
                    let p: f64 = factors
                        .iter()
                        .enumerate()
                        .map(|(i, f)| f.dist(h, s)[space.action_of(j, i)])
                        .product();
                    probs.push(p);
                }
            }
        }
        Ok(CorrelatedPolicy { horizon, num_states, space, probs })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn num_states(&self) -> usize {
        self.num_states
    }
    pub fn joint_space(&self) -> &JointActionSpace {
        &self.space
    }

    pub fn dist(&self, h: usize, s: usize) -> &[f64] {
        let n = self.space.size();
        let start = (h * self.num_states + s) * n;
        &self.probs[start..start + n]
    }

    pub fn set_dist(&mut self, h: usize, s: usize, dist: &[f64]) {
        let n = self.space.size();
        let start = (h * self.num_states + s) * n;
        self.probs[start..start + n].copy_from_slice(dist);
    }

    pub fn table(&self) -> &[f64] {
        &self.probs
    }

    pub fn validate(&self) -> Result<(), GameError> {
        for h in 0..self.horizon {
            for s in 0..self.num_states {
                check_simplex(self.dist(h, s))
                    .map_err(|e| GameError::InvalidArgument(format!("policy at (h={h}, s={s}) {e}")))?;
            }
        }
        Ok(())
    }

    /// Checks that this policy fits a game with the given shape.
    pub fn check_shape(&self, horizon: usize, num_states: usize, space: &JointActionSpace) -> Result<(), GameError> {
        if self.horizon != horizon || self.num_states != num_states || &self.space != space {
            return Err(GameError::Dimension(format!(
                "policy shape (H={}, S={}, actions={:?}) does not match game (H={horizon}, S={num_states}, actions={:?})",
                self.horizon,
                self.num_states,
                self.space.counts(),
                space.counts()
            )));
        }
        Ok(())
    }

    /// Marginal policy of one player.
    pub fn marginal(&self, player: usize) -> MarkovPolicy {
        marginalize(self, player)
    }
}

/// Sums each joint distribution over the other players' actions.
pub fn marginalize(policy: &CorrelatedPolicy, player: usize) -> MarkovPolicy {
    let space = &policy.space;
    let n = space.count(player);
    let mut probs = vec![0.0; policy.horizon * policy.num_states * n];
    for h in 0..policy.horizon {
        for s in 0..policy.num_states {
            let out = &mut probs[(h * policy.num_states + s) * n..][..n];
            for (j, p) in policy.dist(h, s).iter().enumerate() {
                out[space.action_of(j, player)] += p;
            }
        }
    }
    MarkovPolicy { player, horizon: policy.horizon, num_states: policy.num_states, num_actions: n, probs }
}

/// `E_{a ~ dist} Q(a)` for one `(h, s)`.
pub fn policy_expectation(q: &[f64], dist: &[f64]) -> f64 {
    assert_eq!(q.len(), dist.len(), "Q row and distribution must have equal length");
    super::dot(q, dist)
}
