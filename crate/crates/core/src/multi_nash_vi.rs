//! Optimistic value iteration for m-player general-sum games and its
//! reward-free counterpart.
//!
//! Every player keeps upper and lower action values. The bonus is the single
//! `β = c √(S H² ι / t)` with no auxiliary correction term, and the
//! equilibrium subroutine sees the upper tables only.

use serde::{Deserialize, Serialize};

use crate::error::{AlgoError, GameError};
use crate::evaluation::{cce_gap, ce_gap, ValueTable};
use crate::game_model::{dot, sample_path, CorrelatedPolicy, Dynamics, GeneralSumGame, MarkovGame, TransitionModel};
use crate::matrix_equilibrium::{EquilibriumKind, PayoffTensors, DEFAULT_TOL};
use crate::model::EmpiricalModel;
use crate::nash_vi::Iota;
use crate::run_log::{EpisodeRecord, RunLog};
use crate::vi_zero::{explore_with_bonus, ExplorationState, ExploreConfig, ExploreOutput};

/// Default limit on `H · S · ∏ Aᵢ`.
pub const DEFAULT_CELL_BUDGET: usize = 10_000_000;

/// `c √(S H² ι / t)`.
pub fn multi_bonus(t: u64, horizon: usize, num_states: usize, iota: f64, c: f64) -> Result<f64, GameError> {
    if t == 0 {
        return Err(GameError::InvalidArgument("bonus needs at least one visit".into()));
    }
    let h = horizon as f64;
    Ok(c * (num_states as f64 * h * h * iota / t as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiConfig {
    pub kind: EquilibriumKind,
    pub c_beta: f64,
    pub iota: Iota,
    /// Exact gap (of the chosen kind) of the deployed policy every this many episodes; 0 disables.
    pub eval_every: usize,
    pub solver_tol: f64,
    pub cell_budget: usize,
}

impl MultiConfig {
    /// `c = 1`, `p = 0.05`.
    pub fn practical(kind: EquilibriumKind) -> Self {
        MultiConfig { kind, c_beta: 1.0, iota: Iota::Auto { p: 0.05 }, eval_every: 10, solver_tol: DEFAULT_TOL, cell_budget: DEFAULT_CELL_BUDGET }
    }

    /// `c = 10`, `p = 0.01`.
    pub fn theory(kind: EquilibriumKind) -> Self {
        MultiConfig { c_beta: 10.0, iota: Iota::Auto { p: 0.01 }, ..Self::practical(kind) }
    }

    fn validate(&self) -> Result<(), GameError> {
        if !(self.c_beta > 0.0) {
            return Err(GameError::InvalidArgument("bonus constant must be positive".into()));
        }
        self.iota.validate()
    }
}

fn check_budget<M: TransitionModel + ?Sized>(model: &M, budget: usize) -> Result<(), AlgoError> {
    let cells = model
        .horizon()
        .checked_mul(model.num_states())
        .and_then(|x| x.checked_mul(model.num_joint()))
        .unwrap_or(usize::MAX);
    if cells > budget {
        return Err(AlgoError::Budget { cells, budget });
    }
    Ok(())
}

/// Per-player optimistic tables and the joint model.
#[derive(Clone, Debug)]
pub struct MultiLearnerState {
    pub model: EmpiricalModel,
    q_up: Vec<Vec<f64>>,
    q_low: Vec<Vec<f64>>,
    v_up: Vec<ValueTable>,
    v_low: Vec<ValueTable>,
    policy: CorrelatedPolicy,
    best_gap: f64,
    output: Option<CorrelatedPolicy>,
    output_episode: usize,
    episode: usize,
}

impl MultiLearnerState {
    pub fn new<G: MarkovGame + ?Sized>(game: &G) -> Self {
        let model = EmpiricalModel::like(game);
        let (nh, ns, m) = (game.horizon(), game.num_states(), game.num_players());
        let top = nh as f64;
        let mut up = ValueTable::zeros(nh, ns);
        for h in 0..nh {
            for s in 0..ns {
                up.set(h, s, top);
            }
        }
        MultiLearnerState {
            q_up: vec![vec![top; model.num_cells()]; m],
            q_low: vec![vec![0.0; model.num_cells()]; m],
            v_up: vec![up; m],
            v_low: vec![ValueTable::zeros(nh, ns); m],
            policy: CorrelatedPolicy::uniform(nh, ns, game.joint_space().clone()),
            best_gap: top,
            output: None,
            output_episode: 0,
            episode: 0,
            model,
        }
    }

    pub fn q_up(&self, player: usize) -> &[f64] {
        &self.q_up[player]
    }
    pub fn q_low(&self, player: usize) -> &[f64] {
        &self.q_low[player]
    }
    pub fn v_up(&self, player: usize) -> &ValueTable {
        &self.v_up[player]
    }
    pub fn v_low(&self, player: usize) -> &ValueTable {
        &self.v_low[player]
    }
    pub fn policy(&self) -> &CorrelatedPolicy {
        &self.policy
    }
    pub fn best_gap(&self) -> f64 {
        self.best_gap
    }
    pub fn output_policy(&self) -> Option<&CorrelatedPolicy> {
        self.output.as_ref()
    }
    pub fn episode(&self) -> usize {
        self.episode
    }

    /// `max_i (V̄_{1,i} − V̲_{1,i})(s₁)`.
    pub fn optimistic_gap(&self) -> f64 {
        let s1 = self.model.initial_state();
        self.v_up
            .iter()
            .zip(&self.v_low)
            .map(|(u, l)| u.get(0, s1) - l.get(0, s1))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One backward sweep over all players' tables.
pub fn multi_value_pass(
    state: &mut MultiLearnerState,
    rewards: &[Vec<f64>],
    kind: EquilibriumKind,
    bonus: &dyn Fn(u64) -> f64,
    solver_tol: f64,
) -> Result<(usize, f64), AlgoError> {
    let model = &state.model;
    let space = model.joint_space().clone();
    let (nh, ns, nj, m) = (model.horizon(), model.num_states(), space.size(), space.num_players());
    if rewards.len() != m || rewards.iter().any(|r| r.len() != nh * ns * nj) {
        return Err(GameError::Dimension(format!("need {m} reward tables of {} entries", nh * ns * nj)).into());
    }
    let top = nh as f64;
    let (mut solves, mut max_residual) = (0, 0.0f64);
    for h in (0..nh).rev() {
        let up_next: Vec<Vec<f64>> = state.v_up.iter().map(|v| v.step(h + 1).to_vec()).collect();
        let low_next: Vec<Vec<f64>> = state.v_low.iter().map(|v| v.step(h + 1).to_vec()).collect();
        for s in 0..ns {
            let base = (h * ns + s) * nj;
            for j in 0..nj {
                let t = model.count(h, s, j);
                if t == 0 {
                    continue;
                }
                let p = model.transition(h, s, j);
                let beta = bonus(t);
                for i in 0..m {
                    let r = rewards[i][base + j];
                    state.q_up[i][base + j] = (r + dot(p, &up_next[i]) + beta).min(top);
                    state.q_low[i][base + j] = (r + dot(p, &low_next[i]) - beta).max(0.0);
                }
            }
            let payoffs: Vec<Vec<f64>> = (0..m).map(|i| state.q_up[i][base..base + nj].to_vec()).collect();
            let tensors = PayoffTensors::new(space.clone(), payoffs).map_err(|source| AlgoError::Solver { h, s, source })?;
            let cert = kind.solve(&tensors, solver_tol).map_err(|source| AlgoError::Solver { h, s, source })?;
            solves += 1;
            max_residual = max_residual.max(cert.max_constraint_residual);
            for i in 0..m {
                let up = dot(&cert.joint_dist, &state.q_up[i][base..base + nj]).min(top);
                let low = dot(&cert.joint_dist, &state.q_low[i][base..base + nj]).max(0.0);
                state.v_up[i].set(h, s, up);
                state.v_low[i].set(h, s, low);
            }
            state.policy.set_dist(h, s, &cert.joint_dist);
        }
    }
    Ok((solves, max_residual))
}

/// Exact gap matching the equilibrium notion: `ce_gap` for CE, `cce_gap`
/// otherwise (for product policies the latter is the Nash gap).
pub fn kind_gap<G: MarkovGame + ?Sized>(game: &G, policy: &CorrelatedPolicy, kind: EquilibriumKind) -> Result<f64, GameError> {
    match kind {
        EquilibriumKind::Ce => Ok(ce_gap(game, policy)?.0),
        EquilibriumKind::Cce | EquilibriumKind::Nash => cce_gap(game, policy),
    }
}

#[derive(Clone, Debug)]
pub struct MultiOutput {
    pub policy: CorrelatedPolicy,
    pub log: RunLog,
}

pub fn multi_run(game: &GeneralSumGame, episodes: usize, config: &MultiConfig, seed: u64) -> Result<MultiOutput, AlgoError> {
    multi_run_with_observer(game, episodes, config, seed, |_| {})
}

/// Like [`multi_run`], calling `observer` after every value pass, before the episode is played.
/// Works on any [`MarkovGame`], so a zero-sum game runs with payoffs `(r, −r)`.
pub fn multi_run_with_observer<G: MarkovGame + ?Sized>(
    game: &G,
    episodes: usize,
    config: &MultiConfig,
    seed: u64,
    mut observer: impl FnMut(&MultiLearnerState),
) -> Result<MultiOutput, AlgoError> {
    if episodes == 0 {
        return Err(GameError::InvalidArgument("need at least one episode".into()).into());
    }
    config.validate()?;
    check_budget(game, config.cell_budget)?;
    let (nh, ns, nj) = (game.horizon(), game.num_states(), game.num_joint());
    let rewards: Vec<Vec<f64>> = (0..game.num_players())
        .map(|i| {
            let mut r = Vec::with_capacity(nh * ns * nj);
            for h in 0..nh {
                for s in 0..ns {
                    for j in 0..nj {
                        r.push(game.utility(i, h, s, j));
                    }
                }
            }
            r
        })
        .collect();
    let iota = config.iota.resolve(ns, nj, episodes, nh);
    let c = config.c_beta;
    let bonus = move |t: u64| multi_bonus(t, nh, ns, iota, c).expect("called with t >= 1");
    let mut state = MultiLearnerState::new(game);
    let mut log = RunLog::new(seed);
    for k in 1..=episodes {
        state.episode = k;
        let (solves, residual) = multi_value_pass(&mut state, &rewards, config.kind, &bonus, config.solver_tol)?;
        log.record_pass(solves, residual);
        let gap = state.optimistic_gap();
        if gap < state.best_gap {
            state.best_gap = gap;
            state.output = Some(state.policy.clone());
            state.output_episode = k;
        } else if state.output.is_none() {
            state.output = Some(state.policy.clone());
            state.output_episode = k;
        }
        observer(&state);
        let exact_gap = if config.eval_every > 0 && (k % config.eval_every == 0 || k == episodes) {
            Some(kind_gap(game, &state.policy, config.kind)?)
        } else {
            None
        };
        log.records.push(EpisodeRecord { episode: k, optimistic_gap: gap, best_gap: state.best_gap, exact_gap });
        let path = sample_path(game, &state.policy, seed, k as u64)?;
        state.model.update(&path)?;
    }
    log.output_episode = state.output_episode;
    let policy = state.output.take().expect("output is set after the first episode");
    Ok(MultiOutput { policy, log })
}

/// Reward-free exploration with the `√S`-inflated bonus `c √(H² S ι / t)`
/// and a joint-action argmax.
pub fn multi_explore(
    dynamics: &Dynamics,
    episodes: usize,
    config: &ExploreConfig,
    seed: u64,
    cell_budget: usize,
) -> Result<ExploreOutput, AlgoError> {
    multi_explore_with_observer(dynamics, episodes, config, seed, cell_budget, |_| {})
}

/// Like [`multi_explore`], calling `observer` after every planning pass.
pub fn multi_explore_with_observer(
    dynamics: &Dynamics,
    episodes: usize,
    config: &ExploreConfig,
    seed: u64,
    cell_budget: usize,
    observer: impl FnMut(&ExplorationState),
) -> Result<ExploreOutput, AlgoError> {
    check_budget(dynamics, cell_budget)?;
    if !(config.c_beta > 0.0) {
        return Err(GameError::InvalidArgument("bonus constant must be positive".into()).into());
    }
    config.iota.validate()?;
    let (nh, ns) = (dynamics.horizon(), dynamics.num_states());
    let iota = config.resolve_iota(dynamics, episodes);
    let c = config.c_beta;
    let bonus = move |t: u64| multi_bonus(t, nh, ns, iota, c).expect("called with t >= 1");
    explore_with_bonus(dynamics, episodes, seed, &bonus, observer)
}
