//! Experiment configuration documents.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::game_model::{AnyGame, GameFile, RewardKind};
use crate::instances::{hard_markov_game, random_general_sum, random_zero_sum};
use crate::matrix_equilibrium::{EquilibriumKind, DEFAULT_TOL};
use crate::multi_nash_vi::DEFAULT_CELL_BUDGET;
use crate::nash_vi::Iota;
use crate::rng::tagged_rng;

use super::HarnessError;

/// Learner selected by an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    NashViHoeffding,
    NashViBernstein,
    MultiNashVi(EquilibriumKind),
    ViZero,
    MultiViZero,
}

impl Algorithm {
    /// File-name form: `multi_nash_vi(cce)` becomes `multi_nash_vi_cce`.
    pub fn slug(&self) -> String {
        self.to_string().replace('(', "_").replace(')', "")
    }

    pub fn is_multi(&self) -> bool {
        matches!(self, Algorithm::MultiNashVi(_) | Algorithm::MultiViZero)
    }

    pub fn is_reward_free(&self) -> bool {
        matches!(self, Algorithm::ViZero | Algorithm::MultiViZero)
    }
}

fn kind_name(kind: EquilibriumKind) -> &'static str {
    match kind {
        EquilibriumKind::Nash => "nash",
        EquilibriumKind::Ce => "ce",
        EquilibriumKind::Cce => "cce",
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::NashViHoeffding => f.write_str("nash_vi_hoeffding"),
            Algorithm::NashViBernstein => f.write_str("nash_vi_bernstein"),
            Algorithm::MultiNashVi(k) => write!(f, "multi_nash_vi({})", kind_name(*k)),
            Algorithm::ViZero => f.write_str("vi_zero"),
            Algorithm::MultiViZero => f.write_str("multi_vi_zero"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "nash_vi_hoeffding" => return Ok(Algorithm::NashViHoeffding),
            "nash_vi_bernstein" => return Ok(Algorithm::NashViBernstein),
            "vi_zero" => return Ok(Algorithm::ViZero),
            "multi_vi_zero" => return Ok(Algorithm::MultiViZero),
            "multi_nash_vi" => return Ok(Algorithm::MultiNashVi(EquilibriumKind::Cce)),
            _ => {}
        }
        let inner = s
            .strip_prefix("multi_nash_vi(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("multi_nash_vi_"));
        match inner {
            Some(k) => k
                .parse::<EquilibriumKind>()
                .map(Algorithm::MultiNashVi)
                .map_err(|_| HarnessError::Config(format!("unknown equilibrium kind in {s:?}"))),
            None => Err(HarnessError::Config(format!("unknown algorithm {s:?}"))),
        }
    }
}

impl TryFrom<String> for Algorithm {
    type Error = HarnessError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.to_string()
    }
}

/// Where the game comes from. A missing `seed` means "use the run seed", so
/// every seed of the experiment gets its own instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    RandomZeroSum {
        num_states: usize,
        num_actions_max: usize,
        num_actions_min: usize,
        horizon: usize,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        sparsity: Option<usize>,
    },
    RandomGeneralSum {
        num_states: usize,
        action_counts: Vec<usize>,
        horizon: usize,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        sparsity: Option<usize>,
        #[serde(default)]
        constant_sum: bool,
    },
    /// Planted tables are drawn from the seed when not given.
    HardMarkovGame {
        num_states: usize,
        num_actions_max: usize,
        num_actions_min: usize,
        horizon: usize,
        eps: f64,
        #[serde(default)]
        a_star: Option<Vec<Vec<usize>>>,
        #[serde(default)]
        b_star: Option<Vec<Vec<usize>>>,
        #[serde(default)]
        seed: Option<u64>,
    },
    File {
        path: PathBuf,
    },
}

const PLANTED_TAG: u64 = 0x504c_414e_5445_4400;

fn planted_table(rng: &mut impl rand::Rng, horizon: usize, num_states: usize, n: usize) -> Vec<Vec<usize>> {
    (0..horizon).map(|_| (0..num_states).map(|_| rng.gen_range(0..n)).collect()).collect()
}

impl InstanceSpec {
    pub fn build(&self, run_seed: u64) -> Result<AnyGame, HarnessError> {
        Ok(match self {
            InstanceSpec::RandomZeroSum { num_states, num_actions_max, num_actions_min, horizon, seed, sparsity } => {
                AnyGame::ZeroSum(random_zero_sum(
                    *num_states,
                    *num_actions_max,
                    *num_actions_min,
                    *horizon,
                    seed.unwrap_or(run_seed),
                    *sparsity,
                )?)
            }
            InstanceSpec::RandomGeneralSum { num_states, action_counts, horizon, seed, sparsity, constant_sum } => {
                AnyGame::GeneralSum(random_general_sum(
                    *num_states,
                    action_counts,
                    *horizon,
                    seed.unwrap_or(run_seed),
                    *sparsity,
                    *constant_sum,
                )?)
            }
            InstanceSpec::HardMarkovGame {
                num_states,
                num_actions_max,
                num_actions_min,
                horizon,
                eps,
                a_star,
                b_star,
                seed,
            } => {
                let mut rng = tagged_rng(seed.unwrap_or(run_seed), PLANTED_TAG);
                let a = match a_star {
                    Some(t) => t.clone(),
                    None => planted_table(&mut rng, *horizon, *num_states, (*num_actions_max).max(1)),
                };
                let b = match b_star {
                    Some(t) => t.clone(),
                    None => planted_table(&mut rng, *horizon, *num_states, (*num_actions_min).max(1)),
                };
                AnyGame::ZeroSum(hard_markov_game(*num_states, *num_actions_max, *num_actions_min, *horizon, &a, &b, *eps)?)
            }
            InstanceSpec::File { path } => GameFile::load(path)?,
        })
    }
}

/// Reward tasks planned after reward-free exploration. Task `i` has mean
/// table `random_reward_table(cells, seed, i)` (one per player for
/// `multi_vi_zero`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    #[serde(default = "default_tasks")]
    pub count: usize,
    /// Generator seed of the task tables; the run seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    /// How realized rewards are drawn from the task means.
    #[serde(default = "default_task_kind")]
    pub reward_kind: RewardKind,
    #[serde(default = "one")]
    pub samples_per_visit: usize,
    /// Equilibrium planned by `multi_vi_zero`.
    #[serde(default = "default_plan_kind")]
    pub plan_kind: EquilibriumKind,
}

fn default_tasks() -> usize {
    5
}
fn default_task_kind() -> RewardKind {
    RewardKind::Bernoulli
}
fn default_plan_kind() -> EquilibriumKind {
    EquilibriumKind::Cce
}
fn one() -> usize {
    1
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec {
            count: default_tasks(),
            seed: None,
            reward_kind: default_task_kind(),
            samples_per_visit: 1,
            plan_kind: default_plan_kind(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub algorithms: Vec<Algorithm>,
    /// Number of episodes `K`.
    pub episodes: usize,
    #[serde(default = "default_c")]
    pub c_beta: f64,
    #[serde(default = "default_c")]
    pub c_gamma: f64,
    #[serde(default = "default_iota")]
    pub iota: Iota,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub tasks: TaskSpec,
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_budget")]
    pub cell_budget: usize,
    /// Fill the `wall_clock_ns` column. Off by default so reruns are byte-identical.
    #[serde(default)]
    pub timing: bool,
}

fn default_c() -> f64 {
    1.0
}
fn default_iota() -> Iota {
    Iota::Auto { p: 0.05 }
}
fn default_eval_every() -> usize {
    10
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_budget() -> usize {
    DEFAULT_CELL_BUDGET
}

/// Command-line overrides; `None` keeps the file value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub episodes: Option<usize>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub out_dir: Option<PathBuf>,
    pub eval_every: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(instance: InstanceSpec, algorithms: Vec<Algorithm>, episodes: usize, seeds: Vec<u64>, out_dir: PathBuf) -> Self {
        ExperimentConfig {
            instance,
            algorithms,
            episodes,
            c_beta: default_c(),
            c_gamma: default_c(),
            iota: default_iota(),
            eval_every: default_eval_every(),
            seeds,
            out_dir,
            tasks: TaskSpec::default(),
            solver_tol: default_tol(),
            cell_budget: default_budget(),
            timing: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(v) = o.seeds {
            self.seeds = v;
        }
        if let Some(v) = o.episodes {
            self.episodes = v;
        }
        if let Some(v) = o.algorithms {
            self.algorithms = v;
        }
        if let Some(v) = o.out_dir {
            self.out_dir = v;
        }
        if let Some(v) = o.eval_every {
            self.eval_every = v;
        }
    }

    /// Checks everything that does not need the instance itself.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.episodes == 0 {
            return bad("episodes must be at least 1");
        }
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty");
        }
        if self.algorithms.is_empty() {
            return bad("algorithms must be nonempty");
        }
        let mut seen = std::collections::BTreeSet::new();
        if !self.seeds.iter().all(|s| seen.insert(*s)) {
            return bad("seeds must be distinct");
        }
        if !(self.c_beta > 0.0 && self.c_gamma > 0.0) {
            return bad("bonus constants must be positive");
        }
        self.iota.validate()?;
        if !(self.solver_tol > 0.0) {
            return bad("solver_tol must be positive");
        }
        if self.algorithms.iter().any(|a| a.is_reward_free()) && (self.tasks.count == 0 || self.tasks.samples_per_visit == 0) {
            return bad("reward-free algorithms need at least one task and one sample per visit");
        }
        Ok(())
    }

    /// Zero-sum learners need a zero-sum game and the multi-player ones a general-sum game.
    pub fn check_compatible(&self, game: &AnyGame) -> Result<(), HarnessError> {
        for a in &self.algorithms {
            match (a.is_multi(), game) {
                (true, AnyGame::ZeroSum(_)) => {
                    return Err(HarnessError::Config(format!("{a} needs a general-sum instance")));
                }
                (false, AnyGame::GeneralSum(_)) => {
                    return Err(HarnessError::Config(format!("{a} needs a zero-sum instance")));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        let all = [
            Algorithm::NashViHoeffding,
            Algorithm::NashViBernstein,
            Algorithm::MultiNashVi(EquilibriumKind::Ce),
            Algorithm::MultiNashVi(EquilibriumKind::Cce),
            Algorithm::MultiNashVi(EquilibriumKind::Nash),
            Algorithm::ViZero,
            Algorithm::MultiViZero,
        ];
        for a in all {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
            assert_eq!(a.slug().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!(Algorithm::MultiNashVi(EquilibriumKind::Ce).slug(), "multi_nash_vi_ce");
        assert!("nash_vi".parse::<Algorithm>().is_err());
        assert!("multi_nash_vi(xyz)".parse::<Algorithm>().is_err());
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"instance": {"generator": "random_zero_sum", "num_states": 2, "num_actions_max": 2,
                "num_actions_min": 2, "horizon": 2},
                "algorithms": ["nash_vi_hoeffding", "multi_nash_vi(ce)"], "episodes": 5,
                "seeds": [0, 1], "out_dir": "out"}"#,
        )
        .unwrap();
        assert_eq!(cfg.eval_every, 10);
        assert_eq!(cfg.tasks.count, 5);
        assert_eq!(cfg.algorithms[1], Algorithm::MultiNashVi(EquilibriumKind::Ce));
        assert!(!cfg.timing);
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_documents_are_rejected() {
        assert!(ExperimentConfig::from_json("{").is_err());
        assert!(ExperimentConfig::from_json(r#"{"instance": {"generator": "nope"}}"#).is_err());
        let mut cfg = ExperimentConfig::new(
            InstanceSpec::File { path: "g.json".into() },
            vec![Algorithm::ViZero],
            0,
            vec![1],
            "out".into(),
        );
        assert!(cfg.validate().is_err());
        cfg.episodes = 3;
        cfg.validate().unwrap();
        cfg.seeds = vec![];
        assert!(cfg.validate().is_err());
        cfg.seeds = vec![2, 2];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overrides_replace_fields() {
        let mut cfg = ExperimentConfig::new(
            InstanceSpec::File { path: "g.json".into() },
            vec![Algorithm::ViZero],
            3,
            vec![1],
            "out".into(),
        );
        cfg.apply(Overrides { seeds: Some(vec![4, 5]), episodes: Some(9), eval_every: Some(2), ..Default::default() });
        assert_eq!((cfg.seeds.clone(), cfg.episodes, cfg.eval_every), (vec![4, 5], 9, 2));
        assert_eq!(cfg.algorithms, vec![Algorithm::ViZero]);
    }

    #[test]
    fn seedless_instances_follow_the_run_seed() {
        let spec = InstanceSpec::RandomZeroSum {
            num_states: 2,
            num_actions_max: 2,
            num_actions_min: 2,
            horizon: 2,
            seed: None,
            sparsity: None,
        };
        assert_eq!(spec.build(3).unwrap(), spec.build(3).unwrap());
        assert_ne!(spec.build(3).unwrap(), spec.build(4).unwrap());
        let hard = InstanceSpec::HardMarkovGame {
            num_states: 2,
            num_actions_max: 2,
            num_actions_min: 2,
            horizon: 2,
            eps: 0.2,
            a_star: None,
            b_star: None,
            seed: Some(1),
        };
        assert_eq!(hard.build(0).unwrap(), hard.build(9).unwrap());
    }
}
