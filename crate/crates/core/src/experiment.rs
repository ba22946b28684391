//! Seeded experiments: paired RHCR/T-RHCR runs, sweeps and artifacts.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disruption::{read_trace, write_trace, Disruption, DisruptionConfig, DisruptionSampler, DisruptionSource};
use crate::error::{ConfigError, ExperimentError};
use crate::events::{write_events, Algorithm};
use crate::generator::{generate_warehouse, GeneratorConfig};
use crate::grid::{CellClass, GridMap, Vertex};
use crate::metrics::{compute_run_metrics, summarize_timings, write_csv, DisruptionRecord, MetricsRow, StepTiming, TaskRecord};
use crate::rng::{stream_rng, Stream};
use crate::sim::{RunOutput, SimConfig, Simulation};
use crate::task::generate_tasks;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgoMode {
    Rhcr,
    Trhcr,
    BothPaired,
}

impl std::str::FromStr for AlgoMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rhcr" => Ok(AlgoMode::Rhcr),
            "trhcr" => Ok(AlgoMode::Trhcr),
            "both-paired" => Ok(AlgoMode::BothPaired),
            _ => Err(format!("unknown algo `{s}` (expected rhcr, trhcr or both-paired)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Agents,
    Radius,
    DropRate,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Agents => "agents",
            SweepParam::Radius => "radius",
            SweepParam::DropRate => "drop-rate",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "agents" => Ok(SweepParam::Agents),
            "radius" => Ok(SweepParam::Radius),
            "drop-rate" | "drop_rate" | "droprate" => Ok(SweepParam::DropRate),
            _ => Err(format!("unknown sweep parameter `{s}`")),
        }
    }
}

/// `live`, or `replay:<file>` with a JSON-lines trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DisruptionMode {
    Live,
    Replay(PathBuf),
}

impl TryFrom<String> for DisruptionMode {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<DisruptionMode> for String {
    fn from(m: DisruptionMode) -> String {
        match m {
            DisruptionMode::Live => "live".into(),
            DisruptionMode::Replay(p) => format!("replay:{}", p.display()),
        }
    }
}

impl std::str::FromStr for DisruptionMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "live" {
            Ok(DisruptionMode::Live)
        } else if let Some(p) = s.strip_prefix("replay:") {
            Ok(DisruptionMode::Replay(PathBuf::from(p)))
        } else {
            Err(format!("expected `live` or `replay:<file>`, got `{s}`"))
        }
    }
}

/// Parses `3`, `1..10` (inclusive) or `1,4,9`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{s}`"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range `{s}`"))?;
        if a > b {
            return Err(format!("empty seed range `{s}`"));
        }
        return Ok((a..=b).collect());
    }
    parse_list(s)
}

/// Comma-separated values; an empty string gives an empty list.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| format!("bad value `{x}`")))
        .collect()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SeedSpec {
    List(Vec<u64>),
    Text(String),
}

fn de_seeds<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<u64>, D::Error> {
    match SeedSpec::deserialize(d)? {
        SeedSpec::List(v) => Ok(v),
        SeedSpec::Text(s) => parse_seeds(&s).map_err(serde::de::Error::custom),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    /// Preset name (`medium`, `large`, `large2wide`) or a map file.
    pub map: String,
    pub agents: usize,
    pub tasks: usize,
    #[serde(deserialize_with = "de_seeds")]
    pub seeds: Vec<u64>,
    pub algo: AlgoMode,
    pub window: u32,
    pub replan_period: u32,
    pub radius: u32,
    pub drop_rate: f64,
    pub breakdown_rate: f64,
    pub duration_min: u32,
    pub duration_max: u32,
    pub disruptions: DisruptionMode,
    pub sweep: Option<SweepParam>,
    pub sweep_values: Vec<f64>,
    pub max_timesteps: u64,
    pub node_limit: usize,
    pub retain_priorities: bool,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        let dis = DisruptionConfig::default();
        ExperimentConfig {
            map: "medium".into(),
            agents: 100,
            tasks: 600,
            seeds: (1..=10).collect(),
            algo: AlgoMode::BothPaired,
            window: sim.window,
            replan_period: sim.replan_period,
            radius: sim.radius,
            drop_rate: dis.drop_rate,
            breakdown_rate: dis.breakdown_rate,
            duration_min: dis.duration_min,
            duration_max: dis.duration_max,
            disruptions: DisruptionMode::Live,
            sweep: None,
            sweep_values: Vec::new(),
            max_timesteps: sim.max_timesteps,
            node_limit: sim.node_limit,
            retain_priorities: sim.retain_priorities,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// The smaller suite used for quick checks: 50 agents, 200 tasks.
    pub fn desk() -> Self {
        ExperimentConfig {
            agents: 50,
            tasks: 200,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &FsPath) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn disruption_config(&self) -> DisruptionConfig {
        DisruptionConfig {
            drop_rate: self.drop_rate,
            breakdown_rate: self.breakdown_rate,
            duration_min: self.duration_min,
            duration_max: self.duration_max,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            window: self.window,
            replan_period: self.replan_period,
            radius: self.radius,
            max_timesteps: self.max_timesteps,
            node_limit: self.node_limit,
            retain_priorities: self.retain_priorities,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sim_config().validate()?;
        self.disruption_config().validate()?;
        if self.agents == 0 {
            return Err(ConfigError::Invalid("at least one agent is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("no seeds given".into()));
        }
        if self.sweep.is_none() && !self.sweep_values.is_empty() {
            return Err(ConfigError::Invalid("sweep values given without a sweep parameter".into()));
        }
        Ok(())
    }

    /// Loads the preset (generated once, independent of the run seeds) or
    /// map file.
    pub fn load_map(&self) -> Result<GridMap, ConfigError> {
        match GeneratorConfig::preset(&self.map) {
            Some(g) => Ok(generate_warehouse(&g, 0)?),
            None => Ok(GridMap::load(FsPath::new(&self.map))?),
        }
    }

    /// Every (seed, sweep value) run point.
    pub fn points(&self) -> Vec<RunPoint> {
        let values: Vec<Option<f64>> = match self.sweep {
            None => vec![None],
            Some(_) => self.sweep_values.iter().map(|&v| Some(v)).collect(),
        };
        let mut out = Vec::new();
        for &v in &values {
            for &seed in &self.seeds {
                let mut p = RunPoint {
                    seed,
                    agents: self.agents,
                    radius: self.radius,
                    drop_rate: self.drop_rate,
                    label: String::new(),
                };
                if let (Some(param), Some(v)) = (self.sweep, v) {
                    match param {
                        SweepParam::Agents => p.agents = v as usize,
                        SweepParam::Radius => p.radius = v as u32,
                        SweepParam::DropRate => p.drop_rate = v,
                    }
                    p.label = format!("-{}{}", param.name(), v);
                }
                out.push(p);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunPoint {
    pub seed: u64,
    pub agents: usize,
    pub radius: u32,
    pub drop_rate: f64,
    /// File-name suffix distinguishing sweep points.
    pub label: String,
}

/// Distinct floor cells, shuffled with the placement stream of `seed`.
pub fn initial_positions(map: &GridMap, n: usize, seed: u64) -> Result<Vec<Vertex>, ConfigError> {
    let mut floor = map.vertices_of(CellClass::Floor);
    if floor.len() < n {
        return Err(ConfigError::Invalid(format!(
            "{n} agents do not fit on {} floor cells",
            floor.len()
        )));
    }
    floor.shuffle(&mut stream_rng(seed, Stream::Placement));
    floor.truncate(n);
    Ok(floor)
}

/// Per-run detail written to `details.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunDetail {
    pub seed: u64,
    pub algo: String,
    pub label: String,
    pub tasks: Vec<TaskRecord>,
    pub timings: Vec<StepTiming>,
    pub disruptions: Vec<DisruptionRecord>,
    pub terraform_adopted: usize,
    pub terraform_rejected: usize,
    pub incomplete: usize,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub point: RunPoint,
    pub output: RunOutput,
    pub row: MetricsRow,
    pub detail: RunDetail,
}

#[derive(Clone, Debug)]
pub struct Failure {
    pub seed: u64,
    pub label: String,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentReport {
    pub results: Vec<RunResult>,
    pub failures: Vec<Failure>,
}

impl ExperimentReport {
    pub fn rows(&self) -> Vec<MetricsRow> {
        self.results.iter().map(|r| r.row.clone()).collect()
    }

    /// Per-point throughput ratio T-RHCR / RHCR, for paired results.
    pub fn paired(&self) -> Vec<(RunPoint, MetricsRow, MetricsRow)> {
        let mut out = Vec::new();
        for a in self.results.iter().filter(|r| r.output.algo == Algorithm::Rhcr) {
            if let Some(b) = self
                .results
                .iter()
                .find(|r| r.output.algo == Algorithm::Trhcr && r.point == a.point)
            {
                out.push((a.point.clone(), a.row.clone(), b.row.clone()));
            }
        }
        out
    }
}

fn finish_run(cfg: &ExperimentConfig, point: &RunPoint, output: RunOutput) -> Result<RunResult, ExperimentError> {
    let m = compute_run_metrics(&output.events)?;
    let timing = summarize_timings(&output.timings);
    let dis = cfg.disruption_config();
    let row = MetricsRow {
        seed: point.seed,
        algo: output.algo.name().into(),
        agents: point.agents,
        tasks: cfg.tasks,
        radius: point.radius,
        drop_rate: point.drop_rate,
        breakdown_rate: dis.breakdown_rate,
        completed: m.completed,
        timesteps: m.timesteps,
        throughput: m.throughput,
        avg_ratio: m.avg_ratio,
        max_ratio: m.max_ratio,
        mean_iter_ms: timing.mean_iter_ms,
        p95_iter_ms: timing.p95_iter_ms,
        mean_disruption_iter_ms: timing.mean_disruption_iter_ms,
    };
    let detail = RunDetail {
        seed: point.seed,
        algo: output.algo.name().into(),
        label: point.label.clone(),
        tasks: m.tasks,
        timings: output.timings.clone(),
        disruptions: m.responses,
        terraform_adopted: m.terraform_adopted,
        terraform_rejected: m.terraform_rejected,
        incomplete: m.incomplete,
    };
    Ok(RunResult {
        point: point.clone(),
        output,
        row,
        detail,
    })
}

/// Runs every algorithm requested by the config at one point.
pub fn run_point(
    cfg: &ExperimentConfig,
    map: &Arc<GridMap>,
    point: &RunPoint,
    replay: Option<&[Disruption]>,
) -> Result<Vec<RunResult>, ExperimentError> {
    let tasks = generate_tasks(map, cfg.tasks, point.seed);
    let starts = initial_positions(map, point.agents, point.seed)?;
    let mut sim_cfg = cfg.sim_config();
    sim_cfg.radius = point.radius;
    let mut dis = cfg.disruption_config();
    dis.drop_rate = point.drop_rate;
    let source = || match replay {
        Some(t) => DisruptionSource::replay(t.to_vec()),
        None => DisruptionSource::Live(DisruptionSampler::new(dis.clone(), point.seed)),
    };
    let run = |algo, source| -> Result<RunOutput, ExperimentError> {
        let sim = Simulation::new(map.clone(), tasks.clone(), &starts, algo, sim_cfg.clone(), source, point.seed)?;
        Ok(sim.run())
    };
    let outputs = match cfg.algo {
        AlgoMode::Rhcr => vec![run(Algorithm::Rhcr, source())?],
        AlgoMode::Trhcr => vec![run(Algorithm::Trhcr, source())?],
        AlgoMode::BothPaired => {
            let a = run(Algorithm::Rhcr, source())?;
            let b = run(Algorithm::Trhcr, DisruptionSource::replay(a.trace.clone()))?;
            vec![a, b]
        }
    };
    outputs
        .into_iter()
        .map(|o| finish_run(cfg, point, o))
        .collect()
}

/// Runs all points in parallel. Failed points are reported, not fatal.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let points = cfg.points();
    if points.is_empty() {
        log::warn!("sweep value list is empty; nothing to run");
        return Ok(ExperimentReport::default());
    }
    let map = Arc::new(cfg.load_map()?);
    let replay = match &cfg.disruptions {
        DisruptionMode::Live => None,
        DisruptionMode::Replay(p) => Some(read_trace(BufReader::new(File::open(p)?))?),
    };
    let outcomes: Vec<(RunPoint, Result<Vec<RunResult>, String>)> = points
        .par_iter()
        .map(|p| {
            let r = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                run_point(cfg, &map, p, replay.as_deref())
            }));
            let r = match r {
                Ok(Ok(v)) => Ok(v),
                Ok(Err(e)) => Err(e.to_string()),
                Err(_) => Err("run panicked".to_string()),
            };
            (p.clone(), r)
        })
        .collect();
    let mut report = ExperimentReport::default();
    for (p, r) in outcomes {
        match r {
            Ok(v) => report.results.extend(v),
            Err(message) => {
                log::error!("seed {}{}: {message}", p.seed, p.label);
                report.failures.push(Failure {
                    seed: p.seed,
                    label: p.label,
                    message,
                });
            }
        }
    }
    report.results.sort_by(|a, b| {
        (&a.point.label, a.point.seed, a.output.algo).cmp(&(&b.point.label, b.point.seed, b.output.algo))
    });
    report.failures.sort_by(|a, b| (&a.label, a.seed).cmp(&(&b.label, b.seed)));
    Ok(report)
}

/// Writes `metrics.csv`, `details.json`, `summary.txt`, one event log per
/// run and one disruption trace per point.
pub fn write_artifacts(cfg: &ExperimentConfig, report: &ExperimentReport) -> Result<(), ExperimentError> {
    let dir = &cfg.out;
    std::fs::create_dir_all(dir)?;
    write_csv(BufWriter::new(File::create(dir.join("metrics.csv"))?), &report.rows())?;
    let details: Vec<&RunDetail> = report.results.iter().map(|r| &r.detail).collect();
    serde_json::to_writer(BufWriter::new(File::create(dir.join("details.json"))?), &details)?;
    for r in &report.results {
        let name = format!("events-{}-{}{}.jsonl", r.point.seed, r.output.algo.name(), r.point.label);
        write_events(BufWriter::new(File::create(dir.join(name))?), &r.output.events)?;
        let trace = format!("disruptions-{}{}.jsonl", r.point.seed, r.point.label);
        // In paired mode both runs hold the same trace; the first writer wins.
        if r.output.algo == Algorithm::Rhcr || cfg.algo != AlgoMode::BothPaired {
            write_trace(BufWriter::new(File::create(dir.join(trace))?), &r.output.trace)?;
        }
    }
    std::fs::write(dir.join("summary.txt"), summary_table(report))?;
    Ok(())
}

/// Plain-text table of every run plus paired throughput ratios.
pub fn summary_table(report: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<6} {:<7} {:<16} {:>6} {:>9} {:>10} {:>9} {:>9} {:>9}",
        "seed", "algo", "point", "agents", "completed", "throughput", "avgRatio", "maxRatio", "iter_ms"
    );
    for r in &report.results {
        let row = &r.row;
        let _ = writeln!(
            s,
            "{:<6} {:<7} {:<16} {:>6} {:>9} {:>10.4} {:>9.3} {:>9.3} {:>9.2}",
            row.seed,
            row.algo,
            r.point.label.trim_start_matches('-'),
            row.agents,
            row.completed,
            row.throughput,
            row.avg_ratio,
            row.max_ratio,
            row.mean_iter_ms
        );
    }
    let paired = report.paired();
    if !paired.is_empty() {
        let _ = writeln!(s, "\npaired comparison (trhcr / rhcr)");
        let mut ratios = Vec::new();
        for (p, a, b) in &paired {
            let tp = ratio(b.throughput, a.throughput);
            let mx = ratio(b.max_ratio, a.max_ratio);
            ratios.push(tp);
            let _ = writeln!(
                s,
                "seed {:<4} {:<16} throughput x{:.3}  maxRatio x{:.3}",
                p.seed,
                p.label.trim_start_matches('-'),
                tp,
                mx
            );
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let wins = ratios.iter().filter(|&&r| r > 1.0).count();
        let _ = writeln!(s, "mean throughput ratio {mean:.4}; {wins}/{} points above 1", ratios.len());
    }
    for f in &report.failures {
        let _ = writeln!(s, "FAILED seed {}{}: {}", f.seed, f.label, f.message);
    }
    s
}

pub fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_specs() {
        assert_eq!(parse_seeds("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_seeds("3,9").unwrap(), vec![3, 9]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert!(parse_seeds("5..2").is_err());
        assert!(parse_list::<u32>("").unwrap().is_empty());
    }

    #[test]
    fn toml_uses_flag_names() {
        let cfg = ExperimentConfig::from_toml(
            "map = \"medium\"\nagents = 20\nseeds = \"1..3\"\nalgo = \"both-paired\"\ndrop-rate = 0.01\n\
             disruptions = \"replay:t.jsonl\"\nsweep = \"radius\"\nsweep-values = [0, 4]\n",
        )
        .unwrap();
        assert_eq!(cfg.agents, 20);
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.drop_rate, 0.01);
        assert_eq!(cfg.disruptions, DisruptionMode::Replay("t.jsonl".into()));
        assert_eq!(cfg.points().len(), 6);
        assert!(ExperimentConfig::from_toml("agentz = 3").is_err());
    }

    #[test]
    fn placement_is_seeded_and_distinct() {
        let map = generate_warehouse(&GeneratorConfig::medium(), 0).unwrap();
        let a = initial_positions(&map, 50, 2).unwrap();
        assert_eq!(a, initial_positions(&map, 50, 2).unwrap());
        assert_ne!(a, initial_positions(&map, 50, 3).unwrap());
        let mut s = a.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 50);
    }
}
