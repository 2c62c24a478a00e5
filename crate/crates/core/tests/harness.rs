mod common;

use std::path::{Path, PathBuf};

use common::enumerate_best_response;
use mgame::game_model::{CorrelatedPolicy, MarkovGame, TransitionModel};
use mgame::harness::{
    compare_report, load_trace, output_files, run_experiment, trace_name, validate_dir, Algorithm, ExperimentConfig,
    ExperimentSummary, InstanceSpec, RowSource, SUMMARY_FILE,
};
use mgame::instances::{random_reward_table, random_zero_sum};
use mgame::matrix_equilibrium::DEFAULT_TOL;
use mgame::rng::mix_seed;
use mgame::vi_zero::{estimate_reward, explore, plan_nash, ExploreConfig, RewardDataset};

fn small_zero_sum(seed: Option<u64>) -> InstanceSpec {
    InstanceSpec::RandomZeroSum { num_states: 2, num_actions_max: 2, num_actions_min: 2, horizon: 2, seed, sparsity: None }
}

fn config(algorithms: Vec<Algorithm>, episodes: usize, seeds: Vec<u64>, out: &Path) -> ExperimentConfig {
    ExperimentConfig::new(small_zero_sum(None), algorithms, episodes, seeds, out.to_path_buf())
}

#[test]
fn one_episode_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(vec![Algorithm::NashViHoeffding], 1, vec![0], dir.path());
    let summary = run_experiment(&cfg).unwrap();
    assert_eq!(summary.failures().count(), 0);
    let rows = load_trace(&dir.path().join(trace_name(Algorithm::NashViHoeffding, 0))).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].episode, 1);
    assert!(rows[0].exact_gap.is_some());
    assert_eq!(validate_dir(dir.path()).unwrap(), 1);
}

#[test]
fn exact_gaps_appear_only_at_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(vec![Algorithm::NashViBernstein], 23, vec![5], dir.path());
    cfg.eval_every = 10;
    run_experiment(&cfg).unwrap();
    let rows = load_trace(&dir.path().join(trace_name(Algorithm::NashViBernstein, 5))).unwrap();
    let marked: Vec<usize> = rows.iter().filter(|r| r.exact_gap.is_some()).map(|r| r.episode).collect();
    assert_eq!(marked, vec![10, 20, 23]);
    assert!(rows.iter().all(|r| r.wall_clock_ns.is_none()));
}

#[test]
fn per_seed_outputs_do_not_depend_on_sibling_seeds() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let algos = vec![Algorithm::NashViHoeffding, Algorithm::ViZero];
    run_experiment(&config(algos.clone(), 30, vec![3], a.path())).unwrap();
    run_experiment(&config(algos.clone(), 30, vec![4, 0, 3, 1, 2], b.path())).unwrap();
    for algo in algos {
        let name = trace_name(algo, 3);
        assert_eq!(std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap());
    }
    let files = |d: &Path| -> Vec<PathBuf> {
        output_files(d).unwrap().into_iter().map(|p| p.file_name().unwrap().into()).collect()
    };
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(fa.iter().all(|f| fb.contains(f)));
    assert!(fb.len() > fa.len());
}

/// `V^{†,ν} − V^{μ,†}` from exhaustive deterministic deviations.
fn brute_nash_gap<G: MarkovGame>(game: &G, pi: &CorrelatedPolicy) -> f64 {
    enumerate_best_response(game, pi, 0) + enumerate_best_response(game, pi, 1)
}

#[test]
fn reward_free_summary_matches_a_direct_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(vec![Algorithm::ViZero], 40, vec![7], dir.path());
    cfg.instance = small_zero_sum(Some(11));
    cfg.tasks.count = 3;
    let summary = run_experiment(&cfg).unwrap();
    let run = &summary.runs[0];
    assert_eq!(run.planned_task_gaps.len(), 3);
    assert!(run.output_gap.is_none());

    let game = random_zero_sum(2, 2, 2, 2, 11, None).unwrap();
    let explore_cfg = ExploreConfig { c_beta: cfg.c_beta, iota: cfg.iota, num_tasks: 3 };
    let out = explore(&game.dynamics(), 40, &explore_cfg, 7).unwrap();
    let cells = game.horizon() * game.num_states() * game.num_joint();
    for (i, reported) in run.planned_task_gaps.iter().enumerate() {
        let reward = random_reward_table(cells, 7, i as u64);
        let data = RewardDataset::augment(
            &out.trajectories,
            game.joint_space(),
            game.num_states(),
            &reward,
            cfg.tasks.reward_kind,
            cfg.tasks.samples_per_visit,
            mix_seed(7, i as u64 + 1),
        )
        .unwrap();
        let r_hat = estimate_reward(&data, game.horizon(), game.num_states()).unwrap();
        let sol = plan_nash(&out.p_out, &r_hat, DEFAULT_TOL).unwrap();
        let truth = game.with_rewards(reward).unwrap();
        let pi = CorrelatedPolicy::product(&[sol.mu, sol.nu]).unwrap();
        let gap = brute_nash_gap(&truth, &pi);
        assert!((gap - reported).abs() <= 1e-9, "task {i}: {gap} vs {reported}");
    }
}

#[test]
fn identical_runs_compare_equal() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        run_experiment(&config(vec![Algorithm::NashViHoeffding], 20, vec![0, 1, 2], d.path())).unwrap();
    }
    let report = compare_report(&[a.path().to_path_buf(), b.path().to_path_buf()]).unwrap();
    assert!(report.mismatches.is_empty());
    let name = |d: &tempfile::TempDir| d.path().display().to_string();
    for source in [RowSource::Trace, RowSource::Output] {
        let ra = report.rows_for(&name(&a), "nash_vi_hoeffding", source);
        let rb = report.rows_for(&name(&b), "nash_vi_hoeffding", source);
        assert!(!ra.is_empty());
        assert_eq!(ra.len(), rb.len());
        for (x, y) in ra.iter().zip(&rb) {
            assert_eq!((x.episode, x.n, x.median, x.q1, x.q3), (y.episode, y.n, y.median, y.q1, y.q3));
        }
    }
}

#[test]
fn hoeffding_and_bernstein_share_every_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let algos = vec![Algorithm::NashViHoeffding, Algorithm::NashViBernstein];
    run_experiment(&config(algos, 35, vec![0, 1, 2, 3], dir.path())).unwrap();
    let report = compare_report(&[dir.path().to_path_buf()]).unwrap();
    assert!(report.mismatches.is_empty());
    let run = dir.path().display().to_string();
    let episodes = |algo: &str| -> Vec<usize> {
        report.rows_for(&run, algo, RowSource::Trace).iter().map(|r| r.episode).collect()
    };
    assert_eq!(episodes("nash_vi_hoeffding"), vec![10, 20, 30, 35]);
    assert_eq!(episodes("nash_vi_hoeffding"), episodes("nash_vi_bernstein"));
    for row in &report.rows {
        assert_eq!(row.n, 4);
        assert!(row.q1 <= row.median && row.median <= row.q3);
    }
}

#[test]
fn summary_is_written_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(vec![Algorithm::NashViHoeffding], 5, vec![0, 1], dir.path());
    cfg.timing = true;
    let summary = run_experiment(&cfg).unwrap();
    assert!(dir.path().join(SUMMARY_FILE).exists());
    assert_eq!(ExperimentSummary::load(dir.path()).unwrap(), summary);
    for run in &summary.runs {
        assert!(run.output_gap.unwrap() >= -1e-9);
        assert!(run.final_delta.is_some());
    }
    let rows = load_trace(&dir.path().join(trace_name(Algorithm::NashViHoeffding, 1))).unwrap();
    assert!(rows.iter().all(|r| r.wall_clock_ns.is_some()));
}

#[test]
fn incompatible_algorithm_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(vec![Algorithm::MultiViZero], 5, vec![0], dir.path());
    assert!(run_experiment(&cfg).is_err());
    let cfg = config(vec![Algorithm::NashViHoeffding], 0, vec![0], dir.path());
    assert!(run_experiment(&cfg).is_err());
    let cfg = config(vec![Algorithm::NashViHoeffding], 3, vec![], dir.path());
    assert!(run_experiment(&cfg).is_err());
}
