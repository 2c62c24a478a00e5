//! Exact dynamic programming on known models: policy values, best responses,
//! Nash values and Nash/CCE/CE gaps.
//!
//! Best responses to a correlated policy are taken against the marginal of the
//! other players' joint action: the deviating player does not see the
//! recommendation. Strategy modifications (the CE notion) do see it; the best
//! modification decomposes over recommended actions at each `(h, s)` because
//! the objective is separable in the substitute chosen for each recommendation.

use crate::error::{AlgoError, GameError};
use crate::game_model::{dot, CorrelatedPolicy, MarkovGame, MarkovPolicy, TransitionModel, ZeroSumGame};
use crate::matrix_equilibrium::{solve_zero_sum_nash, Matrix};

/// State values for steps `0..=H`; step `H` is the terminal zero row.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    horizon: usize,
    num_states: usize,
    values: Vec<f64>,
}

impl ValueTable {
    pub fn zeros(horizon: usize, num_states: usize) -> Self {
        ValueTable { horizon, num_states, values: vec![0.0; (horizon + 1) * num_states] }
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize) -> f64 {
        self.values[h * self.num_states + s]
    }

    #[inline]
    pub fn set(&mut self, h: usize, s: usize, v: f64) {
        self.values[h * self.num_states + s] = v;
    }

    /// Values of all states at step `h`.
    pub fn step(&self, h: usize) -> &[f64] {
        &self.values[h * self.num_states..(h + 1) * self.num_states]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    fn negated(mut self) -> Self {
        self.values.iter_mut().for_each(|v| *v = -*v);
        self
    }
}

/// Per-`(h, s, joint)` action values, laid out like the reward tables.
pub type QTable = Vec<f64>;

fn check_policy<G: MarkovGame + ?Sized>(game: &G, pi: &CorrelatedPolicy) -> Result<(), GameError> {
    pi.check_shape(game.horizon(), game.num_states(), game.joint_space())
}

/// `u_i(s, a) + [P_h V](s, a)` for every joint action at `(h, s)`.
fn backup_row<G: MarkovGame + ?Sized>(game: &G, player: usize, h: usize, s: usize, next: &[f64]) -> Vec<f64> {
    (0..game.num_joint())
        .map(|j| game.utility(player, h, s, j) + dot(game.transition(h, s, j), next))
        .collect()
}

/// Exact value of a correlated policy for every player.
pub fn policy_value<G: MarkovGame + ?Sized>(game: &G, pi: &CorrelatedPolicy) -> Result<Vec<ValueTable>, GameError> {
    check_policy(game, pi)?;
    let (nh, ns) = (game.horizon(), game.num_states());
    let mut out = Vec::with_capacity(game.num_players());
    for player in 0..game.num_players() {
        let mut v = ValueTable::zeros(nh, ns);
        for h in (0..nh).rev() {
            let next = v.step(h + 1).to_vec();
            for s in 0..ns {
                let q = backup_row(game, player, h, s, &next);
                v.set(h, s, dot(&q, pi.dist(h, s)));
            }
        }
        out.push(v);
    }
    Ok(out)
}

/// Distribution of the other players' joint action at `(h, s)`, indexed by
/// [`JointActionSpace::others_index`](crate::game_model::JointActionSpace::others_index).
fn others_marginal(pi: &CorrelatedPolicy, h: usize, s: usize, player: usize) -> Vec<f64> {
    let space = pi.joint_space();
    let mut m = vec![0.0; space.others_size(player)];
    for (j, p) in pi.dist(h, s).iter().enumerate() {
        m[space.others_index(j, player)] += p;
    }
    m
}

/// Value and action-value tables of `player`'s best response to the others'
/// marginal play under `pi`. Q entries are `u_i + P V^†_{h+1}` at every joint action.
pub fn best_response<G: MarkovGame + ?Sized>(
    game: &G,
    pi: &CorrelatedPolicy,
    player: usize,
) -> Result<(ValueTable, QTable), GameError> {
    check_policy(game, pi)?;
    let (nh, ns, nj) = (game.horizon(), game.num_states(), game.num_joint());
    let space = game.joint_space().clone();
    let mut v = ValueTable::zeros(nh, ns);
    let mut q = vec![0.0; nh * ns * nj];
    for h in (0..nh).rev() {
        let next = v.step(h + 1).to_vec();
        for s in 0..ns {
            let row = backup_row(game, player, h, s, &next);
            let others = others_marginal(pi, h, s, player);
            let mut per_action = vec![0.0; space.count(player)];
            for (j, x) in row.iter().enumerate() {
                per_action[space.action_of(j, player)] += others[space.others_index(j, player)] * x;
            }
            v.set(h, s, per_action.into_iter().fold(f64::NEG_INFINITY, f64::max));
            q[(h * ns + s) * nj..(h * ns + s + 1) * nj].copy_from_slice(&row);
        }
    }
    Ok((v, q))
}

/// `V^{†,π_{-i}}` for the given player.
pub fn best_response_value<G: MarkovGame + ?Sized>(
    game: &G,
    pi: &CorrelatedPolicy,
    player: usize,
) -> Result<ValueTable, GameError> {
    Ok(best_response(game, pi, player)?.0)
}

fn pair(game: &ZeroSumGame, mu: &MarkovPolicy, nu: &MarkovPolicy) -> Result<CorrelatedPolicy, GameError> {
    if mu.num_actions() != game.num_actions_max() || nu.num_actions() != game.num_actions_min() {
        return Err(GameError::Dimension("policy action counts do not match the game".into()));
    }
    CorrelatedPolicy::product(&[mu.clone(), nu.clone()])
}

/// Zero-sum best response against a fixed opponent, in max-player units:
/// `V^{†,ν}` when `opponent` is the min-player's policy ν, `V^{μ,†}` when it is μ.
pub fn best_response_zero_sum(game: &ZeroSumGame, opponent: &MarkovPolicy) -> Result<ValueTable, GameError> {
    let (nh, ns) = (game.horizon(), game.num_states());
    match opponent.player() {
        1 => {
            let pi = pair(game, &MarkovPolicy::uniform(0, nh, ns, game.num_actions_max()), opponent)?;
            best_response_value(game, &pi, 0)
        }
        0 => {
            let pi = pair(game, opponent, &MarkovPolicy::uniform(1, nh, ns, game.num_actions_min()))?;
            Ok(best_response_value(game, &pi, 1)?.negated())
        }
        p => Err(GameError::InvalidArgument(format!("zero-sum games have players 0 and 1, got {p}"))),
    }
}

/// `Q^{μ,†}` and `Q^{†,ν}` in max-player units, laid out `(h, s, joint)`.
pub fn best_response_q_bounds(
    game: &ZeroSumGame,
    mu: &MarkovPolicy,
    nu: &MarkovPolicy,
) -> Result<(QTable, QTable), GameError> {
    let pi = pair(game, mu, nu)?;
    let (_, q_dagger_nu) = best_response(game, &pi, 0)?;
    let (_, q_min) = best_response(game, &pi, 1)?;
    Ok((q_min.into_iter().map(|x| -x).collect(), q_dagger_nu))
}

/// `V^{†,ν}_1(s_1) − V^{μ,†}_1(s_1)`.
pub fn nash_gap(game: &ZeroSumGame, mu: &MarkovPolicy, nu: &MarkovPolicy) -> Result<f64, GameError> {
    let pi = pair(game, mu, nu)?;
    let s1 = game.initial_state();
    let upper = best_response_value(game, &pi, 0)?.get(0, s1);
    let lower = -best_response_value(game, &pi, 1)?.get(0, s1);
    Ok(upper - lower)
}

/// Nash policies and values of a known zero-sum model.
#[derive(Clone, Debug, PartialEq)]
pub struct NashSolution {
    pub mu: MarkovPolicy,
    pub nu: MarkovPolicy,
    /// Max-player values `V*_h(s)`.
    pub values: ValueTable,
    /// Largest one-step duality gap over all `(h, s)`.
    pub max_step_gap: f64,
}

/// Backward induction with a matrix-game solve at every `(h, s)`.
/// `reward` uses the `(h, s, joint)` layout with joint = `a * B + b`.
///
/// Each one-step solve is within `tol` of the stage-game value, so the result
/// is a `2 · H · tol`-approximate Nash equilibrium of the model.
pub fn nash_value_iteration<M: TransitionModel + ?Sized>(
    model: &M,
    reward: &[f64],
    tol: f64,
) -> Result<NashSolution, AlgoError> {
    let space = model.joint_space();
    if space.num_players() != 2 {
        return Err(GameError::InvalidArgument("zero-sum planning needs two players".into()).into());
    }
    let (nh, ns, nj) = (model.horizon(), model.num_states(), space.size());
    let (na, nb) = (space.count(0), space.count(1));
    if reward.len() != nh * ns * nj {
        return Err(GameError::Dimension(format!("reward table needs {} entries", nh * ns * nj)).into());
    }
    let mut mu = MarkovPolicy::uniform(0, nh, ns, na);
    let mut nu = MarkovPolicy::uniform(1, nh, ns, nb);
    let mut values = ValueTable::zeros(nh, ns);
    let mut max_step_gap: f64 = 0.0;
    for h in (0..nh).rev() {
        let next = values.step(h + 1).to_vec();
        for s in 0..ns {
            let q: Vec<f64> = (0..nj)
                .map(|j| reward[(h * ns + s) * nj + j] + dot(model.transition(h, s, j), &next))
                .collect();
            let m = Matrix::new(na, nb, q).map_err(|source| AlgoError::Solver { h, s, source })?;
            let sol = solve_zero_sum_nash(&m, tol).map_err(|source| AlgoError::Solver { h, s, source })?;
            max_step_gap = max_step_gap.max(sol.certificate.duality_gap.unwrap_or(0.0));
            mu.set_dist(h, s, &sol.row_strategy);
            nu.set_dist(h, s, &sol.col_strategy);
            values.set(h, s, sol.value);
        }
    }
    Ok(NashSolution { mu, nu, values, max_step_gap })
}

/// Exact Nash equilibrium of a zero-sum game by backward induction.
pub fn exact_nash(game: &ZeroSumGame, tol: f64) -> Result<NashSolution, AlgoError> {
    nash_value_iteration(game, game.reward_table(), tol)
}

/// `V^{†,π_{-i}}_{1,i}(s_1) − V^π_{1,i}(s_1)`.
pub fn exploitability<G: MarkovGame + ?Sized>(game: &G, pi: &CorrelatedPolicy, player: usize) -> Result<f64, GameError> {
    let s1 = game.initial_state();
    let br = best_response_value(game, pi, player)?.get(0, s1);
    let v = policy_value(game, pi)?[player].get(0, s1);
    Ok(br - v)
}

/// `max_i` exploitability.
pub fn cce_gap<G: MarkovGame + ?Sized>(game: &G, pi: &CorrelatedPolicy) -> Result<f64, GameError> {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..game.num_players() {
        worst = worst.max(exploitability(game, pi, i)?);
    }
    Ok(worst)
}

/// A per-`(h, s)` remapping of one player's recommended actions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategyModification {
    pub player: usize,
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    map: Vec<usize>,
}

impl StrategyModification {
    pub fn identity(player: usize, horizon: usize, num_states: usize, num_actions: usize) -> Self {
        let map = (0..horizon * num_states).flat_map(|_| 0..num_actions).collect();
        StrategyModification { player, horizon, num_states, num_actions, map }
    }

    /// Substitute for recommendation `a` at `(h, s)`.
    pub fn apply(&self, h: usize, s: usize, a: usize) -> usize {
        self.map[(h * self.num_states + s) * self.num_actions + a]
    }

    pub fn set(&mut self, h: usize, s: usize, a: usize, to: usize) {
        self.map[(h * self.num_states + s) * self.num_actions + a] = to;
    }

    /// `φ ∘ π`: the policy that plays `φ_{h,s}(a_i)` whenever `π` recommends `a_i`.
    pub fn compose(&self, pi: &CorrelatedPolicy) -> CorrelatedPolicy {
        let space = pi.joint_space().clone();
        let mut out = CorrelatedPolicy::new(pi.horizon(), pi.num_states(), space.clone(), vec![0.0; pi.table().len()])
            .expect("same shape as the input policy");
        for h in 0..pi.horizon() {
            for s in 0..pi.num_states() {
                let mut d = vec![0.0; space.size()];
                for (j, p) in pi.dist(h, s).iter().enumerate() {
                    let a = space.action_of(j, self.player);
                    d[space.with_action(j, self.player, self.apply(h, s, a))] += p;
                }
                out.set_dist(h, s, &d);
            }
        }
        out
    }
}

/// Best strategy modification of `player` against `pi` and its value table.
pub fn best_modification<G: MarkovGame + ?Sized>(
    game: &G,
    pi: &CorrelatedPolicy,
    player: usize,
) -> Result<(ValueTable, StrategyModification), GameError> {
    check_policy(game, pi)?;
    let (nh, ns) = (game.horizon(), game.num_states());
    let space = game.joint_space().clone();
    let n = space.count(player);
    let mut v = ValueTable::zeros(nh, ns);
    let mut phi = StrategyModification::identity(player, nh, ns, n);
    for h in (0..nh).rev() {
        let next = v.step(h + 1).to_vec();
        for s in 0..ns {
            let row = backup_row(game, player, h, s, &next);
            // gain[rec][dev] = Σ_{a_i = rec} π(a) · Q(dev, a_{-i})
            let mut value = vec![vec![0.0; n]; n];
            for (j, p) in pi.dist(h, s).iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                let rec = space.action_of(j, player);
                for (dev, slot) in value[rec].iter_mut().enumerate() {
                    *slot += p * row[space.with_action(j, player, dev)];
                }
            }
            let mut total = 0.0;
            for (rec, vals) in value.iter().enumerate() {
                // identity first, so ties keep the recommendation
                let mut best = rec;
                for dev in 0..n {
                    if vals[dev] > vals[best] {
                        best = dev;
                    }
                }
                phi.set(h, s, rec, best);
                total += vals[best];
            }
            v.set(h, s, total);
        }
    }
    Ok((v, phi))
}

/// `max_i max_φ (V^{φ∘π}_{1,i} − V^π_{1,i})(s_1)` with the maximizing modification of every player.
pub fn ce_gap<G: MarkovGame + ?Sized>(
    game: &G,
    pi: &CorrelatedPolicy,
) -> Result<(f64, Vec<StrategyModification>), GameError> {
    let s1 = game.initial_state();
    let values = policy_value(game, pi)?;
    let mut worst = f64::NEG_INFINITY;
    let mut witnesses = Vec::with_capacity(game.num_players());
    for (i, vi) in values.iter().enumerate() {
        let (v, phi) = best_modification(game, pi, i)?;
        worst = worst.max(v.get(0, s1) - vi.get(0, s1));
        witnesses.push(phi);
    }
    Ok((worst, witnesses))
}

/// All gaps of a correlated policy at the initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub exploitability: Vec<f64>,
    pub cce_gap: f64,
    pub ce_gap: f64,
    pub ce_witness: Vec<StrategyModification>,
    /// `V^π_{1,i}(s_1)` per player.
    pub values: Vec<f64>,
    /// `V^{†,ν}_1 − V^{μ,†}_1` of the marginals; two-player zero-sum games only.
    pub nash_gap: Option<f64>,
}

pub fn gap_report<G: MarkovGame + ?Sized>(game: &G, pi: &CorrelatedPolicy) -> Result<GapReport, GameError> {
    let s1 = game.initial_state();
    let values: Vec<f64> = policy_value(game, pi)?.iter().map(|v| v.get(0, s1)).collect();
    let exploitability = (0..game.num_players())
        .map(|i| Ok(best_response_value(game, pi, i)?.get(0, s1) - values[i]))
        .collect::<Result<Vec<f64>, GameError>>()?;
    let cce_gap = exploitability.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (ce_gap, ce_witness) = ce_gap(game, pi)?;
    let nash_gap = (game.num_reward_tables() == 1 && game.num_players() == 2).then(|| exploitability.iter().sum());
    Ok(GapReport { exploitability, cce_gap, ce_gap, ce_witness, values, nash_gap })
}

/// Zero-sum gap report for a product profile.
pub fn zero_sum_report(game: &ZeroSumGame, mu: &MarkovPolicy, nu: &MarkovPolicy) -> Result<GapReport, GameError> {
    gap_report(game, &pair(game, mu, nu)?)
}
