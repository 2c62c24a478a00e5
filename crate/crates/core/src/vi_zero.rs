//! Reward-free exploration with zero reward, reward estimation from augmented
//! datasets, and planning on the learned model.
//!
//! Exploration runs optimistic value iteration with reward 0 on a
//! [`Dynamics`] view, so no reward field is reachable from it. The output is
//! the snapshot of `P̂` taken at the episode that minimized `Ṽ₁(s₁)`.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AlgoError, GameError};
use crate::evaluation::{nash_value_iteration, NashSolution, ValueTable};
use crate::game_model::{
    dot, sample_path, CorrelatedPolicy, Dynamics, JointActionSpace, RewardKind, Trajectory, TransitionModel,
};
use crate::matrix_equilibrium::{EquilibriumKind, PayoffTensors, DEFAULT_TOL};
use crate::model::EmpiricalModel;
use crate::nash_vi::{hoeffding_bonus, Iota};
use crate::rng::tagged_rng;
use crate::run_log::{EpisodeRecord, RunLog};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExploreConfig {
    pub c_beta: f64,
    /// `Auto { p }` resolves to `log(N · S · J · T / p)`.
    pub iota: Iota,
    /// Number of reward tasks `N` the exploration is meant to serve.
    pub num_tasks: usize,
}

impl ExploreConfig {
    pub fn practical(num_tasks: usize) -> Self {
        ExploreConfig { c_beta: 1.0, iota: Iota::Auto { p: 0.05 }, num_tasks }
    }

    pub fn resolve_iota(&self, model: &impl TransitionModel, episodes: usize) -> f64 {
        self.iota.resolve(model.num_states(), model.num_joint() * self.num_tasks.max(1), episodes, model.horizon())
    }

    fn validate(&self) -> Result<(), GameError> {
        if !(self.c_beta > 0.0) {
            return Err(GameError::InvalidArgument("bonus constant must be positive".into()));
        }
        self.iota.validate()
    }
}

/// State of the zero-reward learner.
#[derive(Clone, Debug)]
pub struct ExplorationState {
    pub model: EmpiricalModel,
    q: Vec<f64>,
    v: ValueTable,
    policy: CorrelatedPolicy,
    best: f64,
    p_out: Dynamics,
    output_episode: usize,
    episode: usize,
}

impl ExplorationState {
    pub fn new<M: TransitionModel + ?Sized>(dynamics: &M) -> Self {
        let model = EmpiricalModel::like(dynamics);
        let (nh, ns) = (model.horizon(), model.num_states());
        let top = nh as f64;
        let mut v = ValueTable::zeros(nh, ns);
        for h in 0..nh {
            for s in 0..ns {
                v.set(h, s, top);
            }
        }
        let p_out = model.snapshot();
        ExplorationState {
            q: vec![top; model.num_cells()],
            v,
            policy: CorrelatedPolicy::uniform(nh, ns, model.joint_space().clone()),
            best: top,
            p_out,
            output_episode: 1,
            episode: 0,
            model,
        }
    }

    /// `Q̃` in the `(h, s, joint)` layout.
    pub fn q(&self) -> &[f64] {
        &self.q
    }
    pub fn v(&self) -> &ValueTable {
        &self.v
    }
    /// Greedy deterministic policy of the latest pass.
    pub fn policy(&self) -> &CorrelatedPolicy {
        &self.policy
    }
    /// Running minimum `Δ` of `Ṽ₁(s₁)`.
    pub fn best(&self) -> f64 {
        self.best
    }
    pub fn p_out(&self) -> &Dynamics {
        &self.p_out
    }
    pub fn output_episode(&self) -> usize {
        self.output_episode
    }
    pub fn episode(&self) -> usize {
        self.episode
    }
    pub fn uncertainty(&self) -> f64 {
        self.v.get(0, self.model.initial_state())
    }
}

/// Zero-reward optimistic sweep with the given bonus of the visit count; the
/// greedy joint argmax breaks ties toward the lowest joint index.
pub fn exploration_pass(state: &mut ExplorationState, bonus: &dyn Fn(u64) -> f64) {
    let model = &state.model;
    let (nh, ns, nj) = (model.horizon(), model.num_states(), model.num_joint());
    let top = nh as f64;
    for h in (0..nh).rev() {
        let next = state.v.step(h + 1).to_vec();
        for s in 0..ns {
            let base = (h * ns + s) * nj;
            for j in 0..nj {
                let t = model.count(h, s, j);
                if t > 0 {
                    state.q[base + j] = (dot(model.transition(h, s, j), &next) + bonus(t)).min(top);
                }
            }
            let row = &state.q[base..base + nj];
            let mut best = 0;
            for (j, q) in row.iter().enumerate() {
                if *q > row[best] {
                    best = j;
                }
            }
            let mut dist = vec![0.0; nj];
            dist[best] = 1.0;
            state.policy.set_dist(h, s, &dist);
            state.v.set(h, s, row[best]);
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExploreOutput {
    pub p_out: Dynamics,
    pub log: RunLog,
    /// Reward-free data `𝒟`, one trajectory per episode.
    pub trajectories: Vec<Trajectory>,
}

/// Exploration loop shared by the two-player and multiplayer variants.
pub fn explore_with_bonus<M: TransitionModel + ?Sized>(
    dynamics: &M,
    episodes: usize,
    seed: u64,
    bonus: &dyn Fn(u64) -> f64,
    mut observer: impl FnMut(&ExplorationState),
) -> Result<ExploreOutput, AlgoError> {
    if episodes == 0 {
        return Err(GameError::InvalidArgument("need at least one episode".into()).into());
    }
    let mut state = ExplorationState::new(dynamics);
    let mut log = RunLog::new(seed);
    let mut trajectories = Vec::with_capacity(episodes);
    for k in 1..=episodes {
        state.episode = k;
        exploration_pass(&mut state, bonus);
        let u = state.uncertainty();
        if u < state.best {
            state.best = u;
            state.p_out = state.model.snapshot();
            state.output_episode = k;
        }
        observer(&state);
        log.records.push(EpisodeRecord { episode: k, optimistic_gap: u, best_gap: state.best, exact_gap: None });
        let path = sample_path(dynamics, &state.policy, seed, k as u64)?;
        state.model.update(&path)?;
        trajectories.push(path);
    }
    log.output_episode = state.output_episode;
    Ok(ExploreOutput { p_out: state.p_out, log, trajectories })
}

/// Two-player exploration with bonus `c (√(H² ι / t) + H² S ι / t)`.
pub fn explore(dynamics: &Dynamics, episodes: usize, config: &ExploreConfig, seed: u64) -> Result<ExploreOutput, AlgoError> {
    explore_with_observer(dynamics, episodes, config, seed, |_| {})
}

pub fn explore_with_observer(
    dynamics: &Dynamics,
    episodes: usize,
    config: &ExploreConfig,
    seed: u64,
    observer: impl FnMut(&ExplorationState),
) -> Result<ExploreOutput, AlgoError> {
    config.validate()?;
    let (nh, ns) = (dynamics.horizon(), dynamics.num_states());
    let iota = config.resolve_iota(dynamics, episodes);
    let c = config.c_beta;
    let bonus = move |t: u64| hoeffding_bonus(t, nh, ns, iota, c).expect("called with t >= 1");
    explore_with_bonus(dynamics, episodes, seed, &bonus, observer)
}

/// One reward observation `(k, h, s, joint, s', r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub episode: usize,
    pub step: usize,
    pub state: usize,
    pub joint: usize,
    pub next_state: usize,
    pub reward: f64,
}

/// Exploration data augmented with realized rewards of one task.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardDataset {
    pub space: JointActionSpace,
    pub records: Vec<RewardRecord>,
}

impl RewardDataset {
    /// Attaches `samples_per_visit` realized rewards of the task with mean
    /// table `reward` to every step of every trajectory.
    pub fn augment(
        trajectories: &[Trajectory],
        space: &JointActionSpace,
        num_states: usize,
        reward: &[f64],
        kind: RewardKind,
        samples_per_visit: usize,
        seed: u64,
    ) -> Result<RewardDataset, GameError> {
        let nj = space.size();
        let mut rng = tagged_rng(seed, 0x7a5c_0000);
        let mut records = Vec::with_capacity(trajectories.len() * samples_per_visit);
        for (k, traj) in trajectories.iter().enumerate() {
            for (h, step) in traj.steps.iter().enumerate() {
                let cell = (h * num_states + step.state) * nj + step.joint;
                let mean = *reward
                    .get(cell)
                    .ok_or_else(|| GameError::Dimension("reward table smaller than the trajectory shape".into()))?;
                for _ in 0..samples_per_visit {
                    let r = match kind {
                        RewardKind::Deterministic => mean,
                        RewardKind::Bernoulli => f64::from(u8::from(rng.gen::<f64>() < mean)),
                    };
                    records.push(RewardRecord {
                        episode: k + 1,
                        step: h,
                        state: step.state,
                        joint: step.joint,
                        next_state: step.next_state,
                        reward: r,
                    });
                }
            }
        }
        Ok(RewardDataset { space: space.clone(), records })
    }

    fn header(&self) -> Vec<String> {
        let mut cols = vec!["episode".to_string(), "step".into(), "state".into()];
        cols.extend((0..self.space.num_players()).map(|i| format!("action_{i}")));
        cols.extend(["next_state".to_string(), "reward".into()]);
        cols
    }

    /// CSV with columns `episode, step, state, action_0, …, action_{m−1}, next_state, reward`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GameError> {
        let io = |e: csv::Error| GameError::InvalidArgument(format!("dataset write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header()).map_err(io)?;
        for r in &self.records {
            let mut row = vec![r.episode.to_string(), r.step.to_string(), r.state.to_string()];
            row.extend(self.space.decode(r.joint).iter().map(|a| a.to_string()));
            row.extend([r.next_state.to_string(), r.reward.to_string()]);
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| GameError::InvalidArgument(format!("dataset write failed: {e}")))
    }

    pub fn read_csv<R: Read>(input: R, space: JointActionSpace) -> Result<RewardDataset, GameError> {
        let bad = |msg: String| GameError::InvalidArgument(format!("malformed dataset: {msg}"));
        let mut rd = csv::Reader::from_reader(input);
        let m = space.num_players();
        let expected = RewardDataset { space: space.clone(), records: vec![] }.header();
        let header: Vec<String> = rd.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
        if header != expected {
            return Err(bad(format!("header {header:?}, expected {expected:?}")));
        }
        let mut records = Vec::new();
        for row in rd.records() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            let int = |i: usize| row[i].parse::<usize>().map_err(|e| bad(format!("field {i}: {e}")));
            let actions = (0..m).map(|p| int(3 + p)).collect::<Result<Vec<_>, _>>()?;
            if actions.iter().zip(space.counts()).any(|(a, n)| a >= n) {
                return Err(bad("action out of range".into()));
            }
            let reward: f64 = row[4 + m].parse().map_err(|e| bad(format!("reward: {e}")))?;
            if !(0.0..=1.0).contains(&reward) {
                return Err(bad(format!("reward {reward} outside [0, 1]")));
            }
            records.push(RewardRecord {
                episode: int(0)?,
                step: int(1)?,
                state: int(2)?,
                joint: space.encode(&actions),
                next_state: int(3 + m)?,
                reward,
            });
        }
        Ok(RewardDataset { space, records })
    }

    pub fn save(&self, path: &Path) -> Result<(), GameError> {
        let f = std::fs::File::create(path).map_err(|e| GameError::InvalidArgument(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path, space: JointActionSpace) -> Result<RewardDataset, GameError> {
        let f = std::fs::File::open(path).map_err(|e| GameError::InvalidArgument(format!("{}: {e}", path.display())))?;
        Self::read_csv(std::io::BufReader::new(f), space)
    }
}

/// Empirical mean reward per `(h, s, joint)`; 0 where the dataset has no sample.
pub fn estimate_reward(dataset: &RewardDataset, horizon: usize, num_states: usize) -> Result<Vec<f64>, GameError> {
    let nj = dataset.space.size();
    let cells = horizon * num_states * nj;
    let mut sum = vec![0.0; cells];
    let mut n = vec![0u64; cells];
    for r in &dataset.records {
        if r.step >= horizon || r.state >= num_states || r.joint >= nj {
            return Err(GameError::Dimension(format!("record {r:?} outside the model shape")));
        }
        let c = (r.step * num_states + r.state) * nj + r.joint;
        sum[c] += r.reward;
        n[c] += 1;
    }
    Ok(sum.iter().zip(&n).map(|(s, &n)| if n == 0 { 0.0 } else { s / n as f64 }).collect())
}

/// Nash value iteration on a known model (`P̂`, `r̂`).
pub fn plan_nash<M: TransitionModel + ?Sized>(model: &M, reward: &[f64], tol: f64) -> Result<NashSolution, AlgoError> {
    nash_value_iteration(model, reward, tol)
}

/// Output of general-sum planning.
#[derive(Clone, Debug)]
pub struct PlannedPolicy {
    pub policy: CorrelatedPolicy,
    /// Per-player values of `policy` on the planning model.
    pub values: Vec<ValueTable>,
    pub max_residual: f64,
}

/// Backward induction that solves the chosen one-step equilibrium of
/// `(r_i + P̂ V_{i,h+1})_i` at every `(h, s)`.
pub fn plan_equilibrium_general<M: TransitionModel + ?Sized>(
    model: &M,
    rewards: &[Vec<f64>],
    kind: EquilibriumKind,
    tol: f64,
) -> Result<PlannedPolicy, AlgoError> {
    let space = model.joint_space().clone();
    let m = space.num_players();
    let (nh, ns, nj) = (model.horizon(), model.num_states(), space.size());
    if rewards.len() != m || rewards.iter().any(|r| r.len() != nh * ns * nj) {
        return Err(GameError::Dimension(format!("need {m} reward tables of {} entries", nh * ns * nj)).into());
    }
    let mut values = vec![ValueTable::zeros(nh, ns); m];
    let mut policy = CorrelatedPolicy::uniform(nh, ns, space.clone());
    let mut max_residual: f64 = 0.0;
    for h in (0..nh).rev() {
        let next: Vec<Vec<f64>> = values.iter().map(|v| v.step(h + 1).to_vec()).collect();
        for s in 0..ns {
            let base = (h * ns + s) * nj;
            let payoffs: Vec<Vec<f64>> = (0..m)
                .map(|i| (0..nj).map(|j| rewards[i][base + j] + dot(model.transition(h, s, j), &next[i])).collect())
                .collect();
            let tensors = PayoffTensors::new(space.clone(), payoffs).map_err(|source| AlgoError::Solver { h, s, source })?;
            let cert = kind.solve(&tensors, tol).map_err(|source| AlgoError::Solver { h, s, source })?;
            max_residual = max_residual.max(cert.max_constraint_residual);
            for (i, v) in values.iter_mut().enumerate() {
                v.set(h, s, dot(&cert.joint_dist, tensors.payoff(i)));
            }
            policy.set_dist(h, s, &cert.joint_dist);
        }
    }
    Ok(PlannedPolicy { policy, values, max_residual })
}

/// Default one-step tolerance of the planners.
pub const TOL_PLAN: f64 = DEFAULT_TOL;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_model::ZeroSumGame;

    fn chain() -> ZeroSumGame {
        ZeroSumGame::from_fn(
            3,
            3,
            2,
            2,
            0,
            RewardKind::Deterministic,
            |_, s, a, b| {
                let mut p = vec![0.0; 3];
                p[(s + a + b) % 3] = 1.0;
                p
            },
            |_, _, a, b| 0.25 * (a + 2 * b) as f64,
        )
        .unwrap()
    }

    #[test]
    fn single_episode_keeps_uniform_model() {
        let d = chain().dynamics();
        let out = explore(&d, 1, &ExploreConfig::practical(1), 0).unwrap();
        assert_eq!(out.log.records[0].optimistic_gap, 3.0);
        assert!(out.p_out.transition_table().iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn deterministic_chain_is_learned_exactly() {
        let game = chain();
        let cfg = ExploreConfig { c_beta: 0.05, iota: Iota::Fixed(1.0), num_tasks: 1 };
        let out = explore(&game.dynamics(), 400, &cfg, 1).unwrap();
        assert!(out.log.final_best_gap().unwrap() < 3.0);
        let snapshot_model = &out.p_out;
        // every visited row of the snapshot is the true point mass
        let mut seen = EmpiricalModel::like(&game);
        for t in &out.trajectories[..out.log.output_episode - 1] {
            seen.update(t).unwrap();
        }
        for h in 0..3 {
            for s in 0..3 {
                for j in 0..4 {
                    if seen.count(h, s, j) > 0 {
                        assert_eq!(snapshot_model.transition(h, s, j), game.transition(h, s, j));
                    }
                }
            }
        }
    }

    #[test]
    fn running_minimum_is_monotone() {
        let game = crate::instances::random_zero_sum(2, 2, 2, 2, 4, None).unwrap();
        let cfg = ExploreConfig { c_beta: 0.2, iota: Iota::Fixed(1.0), num_tasks: 1 };
        let out = explore(&game.dynamics(), 300, &cfg, 2).unwrap();
        for w in out.log.records.windows(2) {
            assert!(w[1].best_gap <= w[0].best_gap);
            assert!((0.0..=2.0).contains(&w[1].optimistic_gap));
        }
    }

    #[test]
    fn reward_estimation_examples() {
        let space = JointActionSpace::new(vec![2, 2]).unwrap();
        let rec = |joint, reward| RewardRecord { episode: 1, step: 0, state: 0, joint, next_state: 0, reward };
        let ds = RewardDataset { space, records: vec![rec(1, 0.0), rec(1, 1.0), rec(2, 0.3)] };
        let r = estimate_reward(&ds, 1, 1).unwrap();
        assert_eq!(r, vec![0.0, 0.5, 0.3, 0.0]);
    }

    #[test]
    fn dataset_csv_round_trip() {
        let game = chain();
        let out = explore(&game.dynamics(), 5, &ExploreConfig::practical(1), 0).unwrap();
        let ds = RewardDataset::augment(&out.trajectories, game.joint_space(), 3, game.reward_table(), RewardKind::Bernoulli, 2, 9)
            .unwrap();
        assert_eq!(ds.records.len(), 5 * 3 * 2);
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("episode,step,state,action_0,action_1,next_state,reward\n"));
        assert_eq!(RewardDataset::read_csv(buf.as_slice(), game.joint_space().clone()).unwrap(), ds);
        let bad = text.replacen("episode", "epoch", 1);
        assert!(RewardDataset::read_csv(bad.as_bytes(), game.joint_space().clone()).is_err());
    }

    #[test]
    fn deterministic_data_recovers_rewards() {
        let game = chain();
        let out = explore(&game.dynamics(), 50, &ExploreConfig::practical(1), 3).unwrap();
        let ds = RewardDataset::augment(&out.trajectories, game.joint_space(), 3, game.reward_table(), RewardKind::Deterministic, 1, 0)
            .unwrap();
        let r = estimate_reward(&ds, 3, 3).unwrap();
        for rec in &ds.records {
            let c = (rec.step * 3 + rec.state) * 4 + rec.joint;
            assert_eq!(r[c], game.reward_table()[c]);
        }
    }

    #[test]
    fn planning_on_truth_reduces_to_matrix_nash() {
        let game = ZeroSumGame::from_fn(1, 1, 2, 2, 0, RewardKind::Deterministic, |_, _, _, _| vec![1.0], |_, _, a, b| {
            [[0.3, 0.9], [0.7, 0.2]][a][b]
        })
        .unwrap();
        let sol = plan_nash(&game, game.reward_table(), TOL_PLAN).unwrap();
        let m = crate::matrix_equilibrium::Matrix::new(2, 2, game.reward_table().to_vec()).unwrap();
        let direct = crate::matrix_equilibrium::solve_zero_sum_nash(&m, TOL_PLAN).unwrap();
        assert!((sol.values.get(0, 0) - direct.value).abs() < 1e-12);
    }

    #[test]
    fn zero_sum_cce_planning_matches_nash_values() {
        let game = crate::instances::random_zero_sum(2, 2, 2, 2, 11, None).unwrap();
        let nash = plan_nash(&game, game.reward_table(), TOL_PLAN).unwrap();
        let neg: Vec<f64> = game.reward_table().iter().map(|r| -r).collect();
        let cce = plan_equilibrium_general(&game, &[game.reward_table().to_vec(), neg], EquilibriumKind::Cce, TOL_PLAN).unwrap();
        let s1 = game.initial_state();
        assert!((cce.values[0].get(0, s1) - nash.values.get(0, s1)).abs() < 1e-7);
    }

    #[test]
    fn zero_reward_planning_is_uniform_feasible() {
        let game = chain();
        let zeros = vec![0.0; game.reward_table().len()];
        let out = plan_equilibrium_general(&game, &[zeros.clone(), zeros], EquilibriumKind::Ce, TOL_PLAN).unwrap();
        assert_eq!(out.max_residual, 0.0);
        assert!(out.values.iter().all(|v| v.get(0, 0) == 0.0));
    }
}
