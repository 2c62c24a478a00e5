//! Experiment runner: builds instances, drives the learners over a list of
//! seeds and writes one trace CSV per `(algorithm, seed)`, the output policy
//! of each learner run and `summary.json`.
//!
//! Runs execute concurrently on the rayon pool; each learner stays
//! single-threaded and writes only its own file, so outputs do not depend on
//! scheduling.
//!
//! Cost model: a value pass solves `H · S` one-step equilibria per episode, and
//! an exact evaluation costs a few backward inductions over all `(h, s, joint)`
//! cells. With `eval_every = 10` the evaluations stay a small fraction of the
//! run for the game sizes this crate targets.

mod compare;
mod config;
mod trace;

pub use compare::{compare_report, write_report, CompareReport, ReportRow, RowSource};
pub use config::{Algorithm, ExperimentConfig, InstanceSpec, Overrides, TaskSpec};
pub use trace::{load_trace, read_trace, save_trace, validate_dir, write_trace, TraceRow, TRACE_COLUMNS};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

use crate::error::{AlgoError, GameError};
use crate::evaluation::nash_gap;
use crate::game_model::{AnyGame, GeneralSumGame, MarkovGame, PolicyFile, TransitionModel, ZeroSumGame};
use crate::instances::random_reward_table;
use crate::multi_nash_vi::{kind_gap, multi_explore_with_observer, multi_run_with_observer, MultiConfig};
use crate::nash_vi::{run_with_observer, BonusConfig, BonusKind, NashViConfig};
use crate::rng::mix_seed;
use crate::run_log::RunLog;
use crate::vi_zero::{estimate_reward, explore_with_observer, plan_equilibrium_general, plan_nash, ExploreConfig, ExploreOutput, RewardDataset};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Algo(#[from] AlgoError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{file}:{line}: {msg}")]
    Schema { file: String, line: usize, msg: String },
    #[error("compare: {0}")]
    Compare(String),
}

/// Outcome of one `(algorithm, seed)` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Trace file name inside the output directory; absent when the run failed.
    pub trace: Option<String>,
    pub error: Option<String>,
    /// Running minimum `Δ` after the last episode.
    pub final_delta: Option<f64>,
    pub output_episode: Option<usize>,
    /// Exact gap of the output policy (Nash gap for the zero-sum learners,
    /// the configured notion for the multi-player one). Absent for
    /// reward-free runs, which report `planned_task_gaps` instead.
    pub output_gap: Option<f64>,
    pub solver_calls: usize,
    pub max_certificate_residual: f64,
    /// Exact gap, in the true game, of the policy planned on `(P̂out, r̂)` for each task.
    pub planned_task_gaps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub runs: Vec<RunSummary>,
}

impl ExperimentSummary {
    pub fn failures(&self) -> impl Iterator<Item = &RunSummary> {
        self.runs.iter().filter(|r| r.error.is_some())
    }

    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(dir.join(SUMMARY_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub const SUMMARY_FILE: &str = "summary.json";

pub fn trace_name(algorithm: Algorithm, seed: u64) -> String {
    format!("{}_seed{seed}.csv", algorithm.slug())
}

/// Output policy document of a learner run; reward-free runs write none.
pub fn policy_name(algorithm: Algorithm, seed: u64) -> String {
    format!("{}_seed{seed}_policy.json", algorithm.slug())
}

struct RunResult {
    log: RunLog,
    clock: Option<Vec<u64>>,
    output_gap: Option<f64>,
    policy: Option<PolicyFile>,
    planned: Vec<f64>,
    planned_residual: f64,
}

struct Clock {
    start: Instant,
    marks: Vec<u64>,
    on: bool,
}

impl Clock {
    fn new(on: bool) -> Self {
        Clock { start: Instant::now(), marks: Vec::new(), on }
    }
    fn tick(&mut self) {
        if self.on {
            self.marks.push(self.start.elapsed().as_nanos() as u64);
        }
    }
    fn finish(self) -> Option<Vec<u64>> {
        self.on.then_some(self.marks)
    }
}

fn zero_sum(game: &AnyGame) -> Result<&ZeroSumGame, HarnessError> {
    match game {
        AnyGame::ZeroSum(g) => Ok(g),
        AnyGame::GeneralSum(_) => Err(HarnessError::Config("algorithm needs a zero-sum instance".into())),
    }
}

fn general_sum(game: &AnyGame) -> Result<&GeneralSumGame, HarnessError> {
    match game {
        AnyGame::GeneralSum(g) => Ok(g),
        AnyGame::ZeroSum(_) => Err(HarnessError::Config("algorithm needs a general-sum instance".into())),
    }
}

fn task_seed(config: &ExperimentConfig, seed: u64) -> u64 {
    config.tasks.seed.unwrap_or(seed)
}

fn plan_zero_sum_tasks(
    config: &ExperimentConfig,
    game: &ZeroSumGame,
    out: &ExploreOutput,
    seed: u64,
) -> Result<(Vec<f64>, f64), HarnessError> {
    let (nh, ns) = (game.horizon(), game.num_states());
    let cells = nh * ns * game.num_joint();
    let results: Vec<Result<(f64, f64), HarnessError>> = (0..config.tasks.count)
        .into_par_iter()
        .map(|i| {
            let reward = random_reward_table(cells, task_seed(config, seed), i as u64);
            let data = RewardDataset::augment(
                &out.trajectories,
                game.joint_space(),
                ns,
                &reward,
                config.tasks.reward_kind,
                config.tasks.samples_per_visit,
                mix_seed(seed, i as u64 + 1),
            )?;
            let r_hat = estimate_reward(&data, nh, ns)?;
            let sol = plan_nash(&out.p_out, &r_hat, config.solver_tol)?;
            let truth = game.with_rewards(reward)?;
            Ok((nash_gap(&truth, &sol.mu, &sol.nu)?, sol.max_step_gap))
        })
        .collect();
    let mut gaps = Vec::with_capacity(results.len());
    let mut worst: f64 = 0.0;
    for r in results {
        let (g, res) = r?;
        gaps.push(g);
        worst = worst.max(res);
    }
    Ok((gaps, worst))
}

fn plan_general_tasks(
    config: &ExperimentConfig,
    game: &GeneralSumGame,
    out: &ExploreOutput,
    seed: u64,
) -> Result<(Vec<f64>, f64), HarnessError> {
    let (nh, ns, m) = (game.horizon(), game.num_states(), game.num_players());
    let cells = nh * ns * game.num_joint();
    let kind = config.tasks.plan_kind;
    let results: Vec<Result<(f64, f64), HarnessError>> = (0..config.tasks.count)
        .into_par_iter()
        .map(|i| {
            let mut truth = Vec::with_capacity(m);
            let mut r_hat = Vec::with_capacity(m);
            for p in 0..m {
                let reward = random_reward_table(cells, mix_seed(task_seed(config, seed), p as u64), i as u64);
                let data = RewardDataset::augment(
                    &out.trajectories,
                    game.joint_space(),
                    ns,
                    &reward,
                    config.tasks.reward_kind,
                    config.tasks.samples_per_visit,
                    mix_seed(seed, (i * m + p) as u64 + 1),
                )?;
                r_hat.push(estimate_reward(&data, nh, ns)?);
                truth.push(reward);
            }
            let planned = plan_equilibrium_general(&out.p_out, &r_hat, kind, config.solver_tol)?;
            let truth = game.with_rewards(truth)?;
            Ok((kind_gap(&truth, &planned.policy, kind)?, planned.max_residual))
        })
        .collect();
    let mut gaps = Vec::with_capacity(results.len());
    let mut worst: f64 = 0.0;
    for r in results {
        let (g, res) = r?;
        gaps.push(g);
        worst = worst.max(res);
    }
    Ok((gaps, worst))
}

fn run_one(config: &ExperimentConfig, algorithm: Algorithm, seed: u64) -> Result<RunResult, HarnessError> {
    let game = config.instance.build(seed)?;
    let k = config.episodes;
    let mut clock = Clock::new(config.timing);
    match algorithm {
        Algorithm::NashViHoeffding | Algorithm::NashViBernstein => {
            let g = zero_sum(&game)?;
            let kind = if algorithm == Algorithm::NashViHoeffding { BonusKind::Hoeffding } else { BonusKind::Bernstein };
            let bonus = BonusConfig { kind, c_beta: config.c_beta, c_gamma: config.c_gamma, iota: config.iota };
            let cfg = NashViConfig { eval_every: config.eval_every, solver_tol: config.solver_tol, ..NashViConfig::new(bonus) };
            let out = run_with_observer(g, k, &cfg, seed, |_| clock.tick())?;
            let gap = nash_gap(g, &out.mu, &out.nu)?;
            let policy = Some(PolicyFile::from_product(&[out.mu, out.nu]));
            Ok(RunResult { log: out.log, clock: clock.finish(), output_gap: Some(gap), policy, planned: vec![], planned_residual: 0.0 })
        }
        Algorithm::MultiNashVi(kind) => {
            let g = general_sum(&game)?;
            let cfg = MultiConfig {
                kind,
                c_beta: config.c_beta,
                iota: config.iota,
                eval_every: config.eval_every,
                solver_tol: config.solver_tol,
                cell_budget: config.cell_budget,
            };
            let out = multi_run_with_observer(g, k, &cfg, seed, |_| clock.tick())?;
            let gap = kind_gap(g, &out.policy, kind)?;
            let policy = Some(PolicyFile::from_correlated(&out.policy));
            Ok(RunResult { log: out.log, clock: clock.finish(), output_gap: Some(gap), policy, planned: vec![], planned_residual: 0.0 })
        }
        Algorithm::ViZero => {
            let g = zero_sum(&game)?;
            let cfg = ExploreConfig { c_beta: config.c_beta, iota: config.iota, num_tasks: config.tasks.count };
            let out = explore_with_observer(&g.dynamics(), k, &cfg, seed, |_| clock.tick())?;
            let clock = clock.finish();
            let (planned, planned_residual) = plan_zero_sum_tasks(config, g, &out, seed)?;
            Ok(RunResult { log: out.log, clock, output_gap: None, policy: None, planned, planned_residual })
        }
        Algorithm::MultiViZero => {
            let g = general_sum(&game)?;
            let cfg = ExploreConfig { c_beta: config.c_beta, iota: config.iota, num_tasks: config.tasks.count };
            let out = multi_explore_with_observer(&g.dynamics(), k, &cfg, seed, config.cell_budget, |_| clock.tick())?;
            let clock = clock.finish();
            let (planned, planned_residual) = plan_general_tasks(config, g, &out, seed)?;
            Ok(RunResult { log: out.log, clock, output_gap: None, policy: None, planned, planned_residual })
        }
    }
}

fn execute(config: &ExperimentConfig, algorithm: Algorithm, seed: u64) -> RunSummary {
    let mut summary = RunSummary {
        algorithm,
        seed,
        trace: None,
        error: None,
        final_delta: None,
        output_episode: None,
        output_gap: None,
        solver_calls: 0,
        max_certificate_residual: 0.0,
        planned_task_gaps: vec![],
    };
    let result = run_one(config, algorithm, seed).and_then(|r| {
        let name = trace_name(algorithm, seed);
        save_trace(&config.out_dir.join(&name), &r.log, r.clock.as_deref())?;
        if let Some(p) = &r.policy {
            std::fs::write(config.out_dir.join(policy_name(algorithm, seed)), p.to_json())?;
        }
        Ok((name, r))
    });
    match result {
        Ok((name, r)) => {
            summary.trace = Some(name);
            summary.final_delta = r.log.final_best_gap();
            summary.output_episode = Some(r.log.output_episode);
            summary.output_gap = r.output_gap;
            summary.solver_calls = r.log.solver_calls;
            summary.max_certificate_residual = r.log.max_certificate_residual.max(r.planned_residual);
            summary.planned_task_gaps = r.planned;
        }
        Err(e) => {
            log::warn!("{algorithm} seed {seed} failed: {e}");
            summary.error = Some(e.to_string());
        }
    }
    summary
}

/// Runs every `(algorithm, seed)` pair and writes the traces and `summary.json`
/// into `config.out_dir`. Configuration problems abort before anything runs;
/// failures of individual runs are recorded in the summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary, HarnessError> {
    config.validate()?;
    let probe = config.instance.build(config.seeds[0])?;
    config.check_compatible(&probe)?;
    std::fs::create_dir_all(&config.out_dir)?;
    let jobs: Vec<(Algorithm, u64)> =
        config.algorithms.iter().flat_map(|&a| config.seeds.iter().map(move |&s| (a, s))).collect();
    log::info!("running {} jobs into {}", jobs.len(), config.out_dir.display());
    let runs: Vec<RunSummary> = jobs.par_iter().map(|&(a, s)| execute(config, a, s)).collect();
    let summary = ExperimentSummary { config: config.clone(), runs };
    std::fs::write(config.out_dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Every file written by [`run_experiment`], sorted.
pub fn output_files(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv" || x == "json"))
        .collect();
    files.sort();
    Ok(files)
}
