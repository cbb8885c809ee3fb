use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tsc_core::a3c::train::train;
use tsc_core::a3c::{Regime, RunConfig};
use tsc_core::harness::oracle::exhaustive_search;
use tsc_core::harness::summary::write_summary_csv;
use tsc_core::harness::{
    evaluate_episode, run_experiment_file, summarize_dir, Controller, EpisodeResult, EvalOptions, PolicyController, SummaryRow,
};
use tsc_core::rewards::Fusion;
use tsc_core::sim::metrics::write_csv;
use tsc_core::sim::ScenarioConfig;

#[derive(Parser)]
#[command(name = "tsc", version, about = "Train and evaluate adaptive traffic-signal controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write checkpoints, metrics.csv, updates.csv and manifest.json.
    Train(TrainArgs),
    /// Run a trained checkpoint on evaluation seeds.
    Evaluate(EvaluateArgs),
    /// Run fixed signal timing on evaluation seeds.
    Baseline(BaselineArgs),
    /// Run every controller of an experiment spec on a shared seed list.
    /// A manifest.json written by an earlier run is accepted as the spec.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute the summary table of an experiment directory.
    Summarize {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        reference: String,
    },
    /// Evaluate every fixed green plan and report the best ones.
    Oracle {
        #[arg(long, default_value = "single_asym_det")]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// single, inrl or shared_async.
    #[arg(long, default_value = "single")]
    regime: String,
    /// Fuse the global reward into each agent's reward.
    #[arg(long, default_value = "off", value_parser = ["off", "on"])]
    coordination: String,
    /// Built-in scenario name or scenario TOML file.
    #[arg(long, default_value = "single")]
    scenario: String,
    /// Run configuration TOML; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Decision epochs per worker.
    #[arg(long)]
    epochs: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalCommon {
    #[arg(long, default_value = "single")]
    scenario: String,
    /// First evaluation seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    episodes: u64,
    /// Sampling window of the metrics stream, seconds.
    #[arg(long, default_value_t = 90.0)]
    window: f64,
    /// Directory for one metrics CSV per seed.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Checkpoint file or training output directory.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Sample actions instead of taking the most probable one.
    #[arg(long)]
    sample: bool,
    #[command(flatten)]
    common: EvalCommon,
}

#[derive(Args)]
struct BaselineArgs {
    /// Green seconds per approach.
    #[arg(long, default_value_t = 60)]
    fst: i64,
    #[command(flatten)]
    common: EvalCommon,
}

fn load_scenario(name: &str) -> Result<ScenarioConfig> {
    ScenarioConfig::load(name).with_context(|| format!("loading scenario '{name}'"))
}

fn run_train(a: TrainArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    config.train.regime = a.regime.parse::<Regime>()?;
    if a.coordination == "on" {
        config.train.coordination = Fusion::On;
    }
    if let Some(s) = a.seed {
        config.train.seed = s;
    }
    if let Some(w) = a.workers {
        config.train.num_workers = w;
    }
    if let Some(e) = a.epochs {
        config.train.total_epochs = e;
    }
    let scenario = load_scenario(&a.scenario)?;
    let out = train(&scenario, config, Some(&a.out))?;
    println!(
        "trained {} on {}: {} episodes, {} store updates, {} plans ({} violations) in {:.1} s",
        out.config.train.regime.name(),
        scenario.name,
        out.episodes,
        out.store_updates.iter().sum::<u64>(),
        out.plans_emitted,
        out.plan_violations,
        out.wall_seconds
    );
    for f in &out.failures {
        eprintln!("warning: {f}");
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn run_episodes(controller: &Controller, c: &EvalCommon) -> Result<()> {
    if c.episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    let scenario = load_scenario(&c.scenario)?;
    let opts = EvalOptions { window: c.window, ..EvalOptions::default() };
    let results: Vec<EpisodeResult> = (c.seed..c.seed + c.episodes)
        .map(|s| evaluate_episode(&scenario, controller, s, &opts))
        .collect::<Result<_, _>>()?;
    if let Some(dir) = &c.out {
        fs::create_dir_all(dir)?;
        for r in &results {
            let f = fs::File::create(dir.join(format!("seed_{}.csv", r.seed)))?;
            write_csv(f, &r.intersection_ids, &r.samples)?;
        }
    }
    println!("seed,avg_delay_s_per_km,avg_density_veh_per_km,plans,violations");
    for r in &results {
        println!("{},{:.3},{:.3},{},{}", r.seed, r.avg_delay, r.avg_density, r.plans_emitted, r.plan_violations);
    }
    let n = results.len() as f64;
    println!(
        "mean,{:.3},{:.3}",
        results.iter().map(|r| r.avg_delay).sum::<f64>() / n,
        results.iter().map(|r| r.avg_density).sum::<f64>() / n
    );
    Ok(())
}

fn print_rows(rows: &[SummaryRow]) {
    println!("{:<16} {:>5} {:>12} {:>9} {:>12} {:>9} {:>9} {:>9}", "label", "seeds", "delay", "sd", "density", "sd", "dDelay%", "dDens%");
    for r in rows {
        println!(
            "{:<16} {:>5} {:>12.2} {:>9.2} {:>12.2} {:>9.2} {:>9.1} {:>9.1}",
            r.label, r.seeds, r.delay_mean, r.delay_sd, r.density_mean, r.density_sd, r.delay_change_pct, r.density_change_pct
        );
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(a) => run_train(a),
        Command::Evaluate(a) => {
            let scenario = load_scenario(&a.common.scenario)?;
            let mut pc = PolicyController::load(&a.checkpoint, &scenario)?;
            pc.greedy = !a.sample;
            run_episodes(&Controller::Policy(pc), &a.common)
        }
        Command::Baseline(a) => run_episodes(&Controller::fst(a.fst)?, &a.common),
        Command::Experiment { spec, out } => {
            let report = run_experiment_file(&spec, &out)?;
            print_rows(&report.rows);
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Summarize { dir, reference } => {
            let rows = summarize_dir(&dir, &reference)?;
            write_summary_csv(&dir.join("summary.csv"), &rows)?;
            print_rows(&rows);
            Ok(())
        }
        Command::Oracle { scenario, seed, top } => {
            let cfg = load_scenario(&scenario)?;
            let r = exhaustive_search(&cfg, seed, &EvalOptions::default())?;
            let mut ranked = r.evaluations.clone();
            ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
            println!("plan,avg_delay_s_per_km");
            for (p, d) in ranked.iter().take(top) {
                let g = p.greens();
                println!("{}-{}-{}-{},{:.3}", g[0], g[1], g[2], g[3], d);
            }
            Ok(())
        }
    }
}
