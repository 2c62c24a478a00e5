//! `mgame`: run experiments, compare runs, generate instances and evaluate policies.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

use mgame::evaluation::gap_report;
use mgame::game_model::{AnyGame, GameFile, PolicyFile};
use mgame::harness::{
    compare_report, run_experiment, validate_dir, write_report, Algorithm, ExperimentConfig, InstanceSpec, Overrides,
};

#[derive(Parser)]
#[command(name = "mgame", version, about = "Model-based self-play for tabular Markov games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds or a half-open range `a..b`.
        #[arg(long)]
        seeds: Option<String>,
        /// Number of episodes.
        #[arg(long)]
        k: Option<usize>,
        /// Comma-separated algorithm names, e.g. `nash_vi_hoeffding,multi_nash_vi(cce)`.
        #[arg(long)]
        algo: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        eval_every: Option<usize>,
    },
    /// Median/IQR table of exact gaps across run directories.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Output CSV; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a game document.
    Gen {
        #[arg(long, value_enum)]
        generator: Generator,
        #[arg(long)]
        states: usize,
        /// Comma-separated action counts, one per player.
        #[arg(long, default_value = "2,2")]
        actions: String,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        sparsity: Option<usize>,
        #[arg(long)]
        constant_sum: bool,
        /// Gap of the hard family.
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact gaps of a policy document against a game document, printed as JSON.
    Eval {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        policy: PathBuf,
    },
    /// Schema-check every trace CSV in a run directory.
    Validate { dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    RandomZeroSum,
    RandomGeneralSum,
    HardMarkovGame,
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a >= b {
            bail!("empty seed range {text}");
        }
        return Ok((a..b).collect());
    }
    text.split(',').map(|s| s.trim().parse::<u64>().with_context(|| format!("bad seed {s:?}"))).collect()
}

fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    text.split(',').map(|s| s.trim().parse::<T>().map_err(anyhow::Error::from)).collect()
}

fn parse_algorithms(text: &str) -> Result<Vec<Algorithm>> {
    // commas inside parentheses never occur, so a plain split is enough
    text.split(',').map(|s| s.parse::<Algorithm>().map_err(anyhow::Error::from)).collect()
}

fn two_player(counts: &[usize]) -> Result<(usize, usize)> {
    match counts {
        [a, b] => Ok((*a, *b)),
        _ => bail!("this generator needs exactly two action counts"),
    }
}

fn cmd_run(
    config: PathBuf,
    seeds: Option<String>,
    k: Option<usize>,
    algo: Option<String>,
    out: Option<PathBuf>,
    eval_every: Option<usize>,
) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(&config)?;
    cfg.apply(Overrides {
        seeds: seeds.as_deref().map(parse_seeds).transpose()?,
        episodes: k,
        algorithms: algo.as_deref().map(parse_algorithms).transpose()?,
        out_dir: out,
        eval_every,
    });
    let summary = run_experiment(&cfg)?;
    let failed: Vec<_> = summary.failures().collect();
    for f in &failed {
        eprintln!("{} seed {}: {}", f.algorithm, f.seed, f.error.as_deref().unwrap_or_default());
    }
    println!(
        "{} runs, {} failed, output in {}",
        summary.runs.len(),
        failed.len(),
        cfg.out_dir.display()
    );
    Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_compare(runs: Vec<PathBuf>, out: Option<PathBuf>) -> Result<ExitCode> {
    let report = compare_report(&runs)?;
    for m in &report.mismatches {
        eprintln!("mismatch: {m}");
    }
    match out {
        Some(path) => write_report(std::fs::File::create(&path)?, &report)?,
        None => write_report(std::io::stdout().lock(), &report)?,
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    generator: Generator,
    states: usize,
    actions: String,
    horizon: usize,
    seed: u64,
    sparsity: Option<usize>,
    constant_sum: bool,
    eps: f64,
    out: PathBuf,
) -> Result<ExitCode> {
    let counts: Vec<usize> = parse_list(&actions)?;
    let spec = match generator {
        Generator::RandomZeroSum => {
            let (a, b) = two_player(&counts)?;
            InstanceSpec::RandomZeroSum {
                num_states: states,
                num_actions_max: a,
                num_actions_min: b,
                horizon,
                seed: Some(seed),
                sparsity,
            }
        }
        Generator::RandomGeneralSum => InstanceSpec::RandomGeneralSum {
            num_states: states,
            action_counts: counts,
            horizon,
            seed: Some(seed),
            sparsity,
            constant_sum,
        },
        Generator::HardMarkovGame => {
            let (a, b) = two_player(&counts)?;
            InstanceSpec::HardMarkovGame {
                num_states: states,
                num_actions_max: a,
                num_actions_min: b,
                horizon,
                eps,
                a_star: None,
                b_star: None,
                seed: Some(seed),
            }
        }
    };
    let game = spec.build(seed)?;
    GameFile::from_game(&game).save(&out)?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(game: PathBuf, policy: PathBuf) -> Result<ExitCode> {
    let game = GameFile::load(&game)?;
    let text = std::fs::read_to_string(&policy).with_context(|| format!("reading {}", policy.display()))?;
    let pi = PolicyFile::from_json(&text)?.into_policy()?;
    let report = match &game {
        AnyGame::ZeroSum(g) => gap_report(g, &pi)?,
        AnyGame::GeneralSum(g) => gap_report(g, &pi)?,
    };
    let doc = json!({
        "values": report.values,
        "exploitability": report.exploitability,
        "cce_gap": report.cce_gap,
        "ce_gap": report.ce_gap,
        "nash_gap": report.nash_gap,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seeds, k, algo, out, eval_every } => cmd_run(config, seeds, k, algo, out, eval_every),
        Command::Compare { runs, out } => cmd_compare(runs, out),
        Command::Gen { generator, states, actions, horizon, seed, sparsity, constant_sum, eps, out } => {
            cmd_gen(generator, states, actions, horizon, seed, sparsity, constant_sum, eps, out)
        }
        Command::Eval { game, policy } => cmd_eval(game, policy),
        Command::Validate { dir } => validate_dir(&dir).map(|n| {
            println!("{n} trace files valid");
            ExitCode::SUCCESS
        }).map_err(Into::into),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
