use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use tmapd::experiment::{
    parse_list, parse_seeds, run_experiment, summary_table, write_artifacts, AlgoMode, DisruptionMode,
    ExperimentConfig, SweepParam,
};

/// Lifelong pickup-and-delivery experiments on warehouse grids.
///
/// Every flag overrides the matching key of the `--config` file. `--agents`,
/// `--radius` and `--drop-rate` take a comma-separated list when they are the
/// swept parameter.
#[derive(Parser, Debug)]
#[command(name = "tmapd", version)]
struct Cli {
    /// TOML file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset (medium, large, large2wide) or map file.
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    agents: Option<String>,
    #[arg(long)]
    tasks: Option<usize>,
    /// `N`, `A..B` (inclusive) or `A,B,C`.
    #[arg(long)]
    seeds: Option<String>,
    /// rhcr, trhcr or both-paired.
    #[arg(long)]
    algo: Option<AlgoMode>,
    #[arg(long)]
    window: Option<u32>,
    #[arg(long)]
    replan_period: Option<u32>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    drop_rate: Option<String>,
    #[arg(long)]
    breakdown_rate: Option<f64>,
    #[arg(long)]
    duration_min: Option<u32>,
    #[arg(long)]
    duration_max: Option<u32>,
    /// `live` or `replay:<file>`.
    #[arg(long)]
    disruptions: Option<DisruptionMode>,
    /// agents, radius or drop-rate.
    #[arg(long)]
    sweep: Option<SweepParam>,
    #[arg(long)]
    max_timesteps: Option<u64>,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn single<T: std::str::FromStr>(flag: &str, text: &str) -> Result<T> {
    let mut v: Vec<T> = parse_list(text).map_err(anyhow::Error::msg)?;
    if v.len() != 1 {
        bail!("--{flag} takes one value unless it is the swept parameter");
    }
    Ok(v.remove(0))
}

fn build_config(cli: Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = cli.map {
        cfg.map = v;
    }
    if let Some(v) = cli.tasks {
        cfg.tasks = v;
    }
    if let Some(v) = &cli.seeds {
        cfg.seeds = parse_seeds(v).map_err(anyhow::Error::msg)?;
    }
    if let Some(v) = cli.algo {
        cfg.algo = v;
    }
    if let Some(v) = cli.window {
        cfg.window = v;
    }
    if let Some(v) = cli.replan_period {
        cfg.replan_period = v;
    }
    if let Some(v) = cli.breakdown_rate {
        cfg.breakdown_rate = v;
    }
    if let Some(v) = cli.duration_min {
        cfg.duration_min = v;
    }
    if let Some(v) = cli.duration_max {
        cfg.duration_max = v;
    }
    if let Some(v) = cli.disruptions {
        cfg.disruptions = v;
    }
    if let Some(v) = cli.max_timesteps {
        cfg.max_timesteps = v;
    }
    if let Some(v) = cli.node_limit {
        cfg.node_limit = v;
    }
    if let Some(v) = cli.out {
        cfg.out = v;
    }
    if cli.sweep.is_some() {
        cfg.sweep = cli.sweep;
    }
    let swept = |flag: &str, text: &Option<String>| -> Result<Option<Vec<f64>>> {
        match text {
            Some(t) if cfg.sweep.is_some_and(|s| s.name() == flag) => {
                Ok(Some(parse_list(t).map_err(anyhow::Error::msg)?))
            }
            _ => Ok(None),
        }
    };
    for (flag, text) in [("agents", &cli.agents), ("radius", &cli.radius), ("drop-rate", &cli.drop_rate)] {
        if let Some(values) = swept(flag, text)? {
            cfg.sweep_values = values;
        } else if let Some(t) = text {
            match flag {
                "agents" => cfg.agents = single(flag, t)?,
                "radius" => cfg.radius = single(flag, t)?,
                _ => cfg.drop_rate = single(flag, t)?,
            }
        }
    }
    Ok(cfg)
}

fn run() -> Result<()> {
    let cfg = build_config(Cli::parse())?;
    let report = run_experiment(&cfg)?;
    if report.results.is_empty() && report.failures.is_empty() {
        return Ok(());
    }
    write_artifacts(&cfg, &report).with_context(|| format!("writing to {}", cfg.out.display()))?;
    print!("{}", summary_table(&report));
    if !report.failures.is_empty() {
        eprintln!("{} run point(s) failed", report.failures.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
