//! Optimistic Nash value iteration for two-player zero-sum games.
//!
//! Each episode runs a full backward sweep of upper and lower action values
//! on the empirical model, picks a CCE of `(Q̄_h(s,·,·), Q̲_h(s,·,·))` at every
//! state, plays it once and records the visited transitions. The output policy
//! is the one with the smallest optimistic gap `(V̄₁ − V̲₁)(s₁)` so far.
//!
//! Rewards are the game's mean reward table, read as known.

use serde::{Deserialize, Serialize};

use crate::error::{AlgoError, GameError};
use crate::evaluation::{nash_gap, ValueTable};
use crate::game_model::{dot, sample_path, CorrelatedPolicy, MarkovPolicy, TransitionModel, ZeroSumGame};
use crate::matrix_equilibrium::{find_cce_pair, Matrix, DEFAULT_TOL};
use crate::model::EmpiricalModel;
use crate::run_log::{EpisodeRecord, RunLog};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonusKind {
    Hoeffding,
    Bernstein,
}

/// The log factor `ι`, either fixed or `log(S · J · T / p)` with `T = K · H`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Iota {
    Fixed(f64),
    Auto { p: f64 },
}

impl Iota {
    pub fn resolve(&self, num_states: usize, num_joint: usize, episodes: usize, horizon: usize) -> f64 {
        match *self {
            Iota::Fixed(v) => v,
            Iota::Auto { p } => ((num_states * num_joint * episodes * horizon) as f64 / p).ln(),
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        match *self {
            Iota::Fixed(v) if v > 0.0 && v.is_finite() => Ok(()),
            Iota::Auto { p } if p > 0.0 && p < 1.0 => Ok(()),
            other => Err(GameError::InvalidArgument(format!("bad log factor {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BonusConfig {
    pub kind: BonusKind,
    pub c_beta: f64,
    pub c_gamma: f64,
    pub iota: Iota,
}

impl BonusConfig {
    /// `c = 1`, `p = 0.05`.
    pub fn practical(kind: BonusKind) -> Self {
        BonusConfig { kind, c_beta: 1.0, c_gamma: 1.0, iota: Iota::Auto { p: 0.05 } }
    }

    /// `c = 10`, `p = 0.01`.
    pub fn theory(kind: BonusKind) -> Self {
        BonusConfig { kind, c_beta: 10.0, c_gamma: 10.0, iota: Iota::Auto { p: 0.01 } }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if !(self.c_beta > 0.0 && self.c_gamma > 0.0) {
            return Err(GameError::InvalidArgument("bonus constants must be positive".into()));
        }
        self.iota.validate()
    }
}

/// `c (√(H² ι / t) + H² S ι / t)`.
pub fn hoeffding_bonus(t: u64, horizon: usize, num_states: usize, iota: f64, c: f64) -> Result<f64, GameError> {
    if t == 0 {
        return Err(GameError::InvalidArgument("bonus needs at least one visit".into()));
    }
    let (t, h, s) = (t as f64, horizon as f64, num_states as f64);
    Ok(c * ((h * h * iota / t).sqrt() + h * h * s * iota / t))
}

/// `c (√(σ̂² ι / t) + H² S ι / t)`.
pub fn bernstein_bonus(t: u64, sigma2: f64, horizon: usize, num_states: usize, iota: f64, c: f64) -> Result<f64, GameError> {
    if t == 0 {
        return Err(GameError::InvalidArgument("bonus needs at least one visit".into()));
    }
    let hh = (horizon * horizon) as f64;
    if !(0.0..=hh).contains(&sigma2) {
        return Err(GameError::InvalidArgument(format!("variance {sigma2} outside [0, {hh}]")));
    }
    let t = t as f64;
    Ok(c * ((sigma2 * iota / t).sqrt() + hh * num_states as f64 * iota / t))
}

/// `P̂ V² − (P̂ V)²`, clamped at zero.
pub fn empirical_variance(p: &[f64], v: &[f64]) -> f64 {
    let mean = dot(p, v);
    let second: f64 = p.iter().zip(v).map(|(p, x)| p * x * x).sum();
    (second - mean * mean).max(0.0)
}

/// `(c / H) · P̂ (V̄_{h+1} − V̲_{h+1})`.
pub fn gamma_bonus(p: &[f64], v_up_next: &[f64], v_low_next: &[f64], horizon: usize, c_gamma: f64) -> f64 {
    let spread: f64 = p.iter().zip(v_up_next.iter().zip(v_low_next)).map(|(p, (u, l))| p * (u - l)).sum();
    (c_gamma / horizon as f64 * spread).max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NashViConfig {
    pub bonus: BonusConfig,
    /// Exact Nash gap of the deployed policy every this many episodes; 0 disables.
    pub eval_every: usize,
    /// Run the value pass only every this many episodes. 1 is the algorithm as written.
    pub sweep_stride: usize,
    pub solver_tol: f64,
}

impl NashViConfig {
    pub fn new(bonus: BonusConfig) -> Self {
        NashViConfig { bonus, eval_every: 10, sweep_stride: 1, solver_tol: DEFAULT_TOL }
    }
}

/// Everything the learner carries between episodes.
#[derive(Clone, Debug)]
pub struct LearnerState {
    pub model: EmpiricalModel,
    q_up: Vec<f64>,
    q_low: Vec<f64>,
    v_up: ValueTable,
    v_low: ValueTable,
    policy: CorrelatedPolicy,
    best_gap: f64,
    output: Option<CorrelatedPolicy>,
    output_episode: usize,
    episode: usize,
}

impl LearnerState {
    pub fn new(game: &ZeroSumGame) -> Self {
        let (nh, ns) = (game.horizon(), game.num_states());
        let cells = nh * ns * game.num_joint();
        let top = nh as f64;
        let mut v_up = ValueTable::zeros(nh, ns);
        for h in 0..nh {
            for s in 0..ns {
                v_up.set(h, s, top);
            }
        }
        LearnerState {
            model: EmpiricalModel::like(game),
            q_up: vec![top; cells],
            q_low: vec![0.0; cells],
            v_up,
            v_low: ValueTable::zeros(nh, ns),
            policy: CorrelatedPolicy::uniform(nh, ns, game.joint_space().clone()),
            best_gap: top,
            output: None,
            output_episode: 0,
            episode: 0,
        }
    }

    /// `Q̄` in the `(h, s, joint)` layout.
    pub fn q_up(&self) -> &[f64] {
        &self.q_up
    }
    pub fn q_low(&self) -> &[f64] {
        &self.q_low
    }
    pub fn v_up(&self) -> &ValueTable {
        &self.v_up
    }
    pub fn v_low(&self) -> &ValueTable {
        &self.v_low
    }
    /// The policy computed by the latest value pass.
    pub fn policy(&self) -> &CorrelatedPolicy {
        &self.policy
    }
    pub fn best_gap(&self) -> f64 {
        self.best_gap
    }
    pub fn output_policy(&self) -> Option<&CorrelatedPolicy> {
        self.output.as_ref()
    }
    pub fn output_episode(&self) -> usize {
        self.output_episode
    }
    pub fn episode(&self) -> usize {
        self.episode
    }

    /// `(V̄₁ − V̲₁)(s₁)`.
    pub fn optimistic_gap(&self) -> f64 {
        let s1 = self.model.initial_state();
        self.v_up.get(0, s1) - self.v_low.get(0, s1)
    }
}

/// Solves performed by one pass and the largest certificate residual.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PassStats {
    pub solves: usize,
    pub max_residual: f64,
}

/// One backward sweep `h = H − 1, …, 0` updating `Q̄, Q̲, V̄, V̲` and the policy.
pub fn value_iteration_pass(
    state: &mut LearnerState,
    reward: &[f64],
    bonus: &BonusConfig,
    iota: f64,
    solver_tol: f64,
) -> Result<PassStats, AlgoError> {
    let model = &state.model;
    let (nh, ns, nj) = (model.horizon(), model.num_states(), model.num_joint());
    if reward.len() != nh * ns * nj {
        return Err(GameError::Dimension(format!("reward table needs {} entries", nh * ns * nj)).into());
    }
    let (na, nb) = (model.joint_space().count(0), model.joint_space().count(1));
    let top = nh as f64;
    let mut stats = PassStats::default();
    for h in (0..nh).rev() {
        let up_next = state.v_up.step(h + 1).to_vec();
        let low_next = state.v_low.step(h + 1).to_vec();
        let mid: Vec<f64> = up_next.iter().zip(&low_next).map(|(u, l)| 0.5 * (u + l)).collect();
        for s in 0..ns {
            let base = (h * ns + s) * nj;
            for j in 0..nj {
                let t = model.count(h, s, j);
                if t == 0 {
                    continue;
                }
                let p = model.transition(h, s, j);
                let beta = match bonus.kind {
                    BonusKind::Hoeffding => hoeffding_bonus(t, nh, ns, iota, bonus.c_beta)?,
                    BonusKind::Bernstein => {
                        let sigma2 = empirical_variance(p, &mid).min(top * top);
                        bernstein_bonus(t, sigma2, nh, ns, iota, bonus.c_beta)?
                    }
                };
                let gamma = gamma_bonus(p, &up_next, &low_next, nh, bonus.c_gamma);
                let r = reward[base + j];
                state.q_up[base + j] = (r + dot(p, &up_next) + gamma + beta).min(top);
                state.q_low[base + j] = (r + dot(p, &low_next) - gamma - beta).max(0.0);
            }
            let q_up = &state.q_up[base..base + nj];
            let q_low = &state.q_low[base..base + nj];
            let up = Matrix::new(na, nb, q_up.to_vec()).map_err(|source| AlgoError::Solver { h, s, source })?;
            let low = Matrix::new(na, nb, q_low.to_vec()).map_err(|source| AlgoError::Solver { h, s, source })?;
            let cert = find_cce_pair(&up, &low, solver_tol).map_err(|source| AlgoError::Solver { h, s, source })?;
            stats.solves += 1;
            stats.max_residual = stats.max_residual.max(cert.max_constraint_residual);
            state.v_up.set(h, s, dot(&cert.joint_dist, q_up).min(top));
            state.v_low.set(h, s, dot(&cert.joint_dist, q_low).max(0.0));
            state.policy.set_dist(h, s, &cert.joint_dist);
        }
    }
    Ok(stats)
}

/// Replaces the output policy iff the current gap is strictly below `Δ`. The
/// first call always stores a policy so that an output exists. Returns whether `Δ` improved.
pub fn track_output(state: &mut LearnerState) -> bool {
    let gap = state.optimistic_gap();
    if gap < state.best_gap {
        state.best_gap = gap;
        state.output = Some(state.policy.clone());
        state.output_episode = state.episode;
        true
    } else {
        if state.output.is_none() {
            state.output = Some(state.policy.clone());
            state.output_episode = state.episode;
        }
        false
    }
}

#[derive(Clone, Debug)]
pub struct NashViOutput {
    pub mu: MarkovPolicy,
    pub nu: MarkovPolicy,
    pub policy: CorrelatedPolicy,
    pub log: RunLog,
}

pub fn run(game: &ZeroSumGame, episodes: usize, config: &NashViConfig, seed: u64) -> Result<NashViOutput, AlgoError> {
    run_with_observer(game, episodes, config, seed, |_| {})
}

/// Like [`run`], calling `observer` after every value pass, before the episode is played.
pub fn run_with_observer(
    game: &ZeroSumGame,
    episodes: usize,
    config: &NashViConfig,
    seed: u64,
    mut observer: impl FnMut(&LearnerState),
) -> Result<NashViOutput, AlgoError> {
    if episodes == 0 {
        return Err(GameError::InvalidArgument("need at least one episode".into()).into());
    }
    config.bonus.validate()?;
    let stride = config.sweep_stride.max(1);
    let iota = config.bonus.iota.resolve(game.num_states(), game.num_joint(), episodes, game.horizon());
    let mut state = LearnerState::new(game);
    let mut log = RunLog::new(seed);
    for k in 1..=episodes {
        state.episode = k;
        if (k - 1) % stride == 0 {
            let stats = value_iteration_pass(&mut state, game.reward_table(), &config.bonus, iota, config.solver_tol)?;
            log.record_pass(stats.solves, stats.max_residual);
        }
        track_output(&mut state);
        observer(&state);
        let exact_gap = if config.eval_every > 0 && (k % config.eval_every == 0 || k == episodes) {
            Some(nash_gap(game, &state.policy.marginal(0), &state.policy.marginal(1))?)
        } else {
            None
        };
        log.records.push(EpisodeRecord {
            episode: k,
            optimistic_gap: state.optimistic_gap(),
            best_gap: state.best_gap,
            exact_gap,
        });
        let path = sample_path(game, &state.policy, seed, k as u64)?;
        state.model.update(&path)?;
    }
    let policy = state.output.take().expect("output is set after the first episode");
    log.output_episode = state.output_episode;
    Ok(NashViOutput { mu: policy.marginal(0), nu: policy.marginal(1), policy, log })
}
