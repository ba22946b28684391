//! Run metrics derived from the event log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::LogError;
use crate::events::{Event, EventKind};
use crate::grid::{CellClass, GridMap, Vertex, UNREACHABLE};
use crate::ids::{AgentId, TaskId};
use crate::task::TaskKind;

/// Round-trip length `p -> d -> p` with every other pod home blocked.
/// `None` if `d` cannot be reached.
pub fn ideal_service_time(map: &GridMap, pickup: Vertex, delivery: Vertex) -> Option<u32> {
    let d = map.bfs_distances(pickup, |v| v == pickup || map.class(v) != CellClass::PodHome);
    match d[delivery.index()] {
        UNREACHABLE => None,
        x => Some(2 * x),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task: TaskId,
    pub agent: AgentId,
    pub pickup_time: u64,
    pub dropoff_time: u64,
    pub ideal: u32,
    pub service_time: u64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DisruptionRecord {
    pub timestep: u64,
    pub new: usize,
    pub affected: usize,
    pub candidates: usize,
    pub trapped: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub completed: usize,
    pub incomplete: usize,
    pub timesteps: u64,
    pub throughput: f64,
    pub avg_ratio: f64,
    pub max_ratio: f64,
    /// Sum over agents of the time of their last move.
    pub flowtime: u64,
    /// Latest last-move time over agents.
    pub makespan: u64,
    pub terraform_adopted: usize,
    pub terraform_rejected: usize,
    pub disruptions: usize,
    pub tasks: Vec<TaskRecord>,
    pub responses: Vec<DisruptionRecord>,
}

/// Computes metrics from a complete log. Terraforming tasks are excluded
/// from the task statistics.
pub fn compute_run_metrics(events: &[Event]) -> Result<RunMetrics, LogError> {
    let mut m = RunMetrics::default();
    let mut last_move: BTreeMap<AgentId, u64> = BTreeMap::new();
    let mut started = false;
    let mut ended = false;
    for e in events {
        match &e.kind {
            EventKind::RunStart { .. } => started = true,
            EventKind::Move { moves } => {
                for mv in moves {
                    last_move.insert(mv.agent, e.timestep + 1);
                }
            }
            EventKind::Restore {
                agent,
                task,
                task_kind: TaskKind::Standard,
                pickup_time,
                ideal,
            } => {
                let service = e.timestep.saturating_sub(*pickup_time);
                m.tasks.push(TaskRecord {
                    task: *task,
                    agent: *agent,
                    pickup_time: *pickup_time,
                    dropoff_time: e.timestep,
                    ideal: *ideal,
                    service_time: service,
                    ratio: service as f64 / (*ideal).max(1) as f64,
                });
            }
            EventKind::DisruptionStart { .. } => m.disruptions += 1,
            EventKind::DisruptionResponse {
                new,
                affected,
                candidates,
                trapped,
            } => m.responses.push(DisruptionRecord {
                timestep: e.timestep,
                new: *new,
                affected: *affected,
                candidates: *candidates,
                trapped: *trapped,
            }),
            EventKind::TerraformAdopted(_) => m.terraform_adopted += 1,
            EventKind::TerraformRejected(_) => m.terraform_rejected += 1,
            EventKind::RunEnd {
                timesteps,
                incomplete,
                ..
            } => {
                m.timesteps = *timesteps;
                m.incomplete = *incomplete;
                ended = true;
            }
            _ => {}
        }
    }
    if !started {
        return Err(LogError::Truncated("missing run-start record".into()));
    }
    if !ended {
        return Err(LogError::Truncated("missing run-end record".into()));
    }
    m.tasks.sort_by_key(|r| r.task);
    m.completed = m.tasks.len();
    m.throughput = if m.timesteps == 0 {
        0.0
    } else {
        m.completed as f64 / m.timesteps as f64
    };
    if !m.tasks.is_empty() {
        m.avg_ratio = m.tasks.iter().map(|r| r.ratio).sum::<f64>() / m.tasks.len() as f64;
        m.max_ratio = m.tasks.iter().map(|r| r.ratio).fold(0.0, f64::max);
    }
    m.flowtime = last_move.values().sum();
    m.makespan = last_move.values().copied().max().unwrap_or(0);
    Ok(m)
}

/// Wall-clock planner time for one timestep; kept apart from the event log.
/// `response_ms` is the part spent reacting to new disruptions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTiming {
    pub timestep: u64,
    pub plan_ms: f64,
    #[serde(default)]
    pub response_ms: f64,
    pub disruption: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub mean_iter_ms: f64,
    pub p95_iter_ms: f64,
    pub mean_disruption_iter_ms: f64,
    pub median_disruption_iter_ms: f64,
}

pub fn summarize_timings(timings: &[StepTiming]) -> TimingSummary {
    let mut all: Vec<f64> = timings.iter().map(|t| t.plan_ms).collect();
    let mut dis: Vec<f64> = timings.iter().filter(|t| t.disruption).map(|t| t.plan_ms).collect();
    all.sort_by(f64::total_cmp);
    dis.sort_by(f64::total_cmp);
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let quantile = |v: &[f64], q: f64| {
        if v.is_empty() {
            0.0
        } else {
            v[((v.len() - 1) as f64 * q).round() as usize]
        }
    };
    TimingSummary {
        mean_iter_ms: mean(&all),
        p95_iter_ms: quantile(&all, 0.95),
        mean_disruption_iter_ms: mean(&dis),
        median_disruption_iter_ms: quantile(&dis, 0.5),
    }
}

/// One row of `metrics.csv`; the field order is the column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub algo: String,
    pub agents: usize,
    pub tasks: usize,
    pub radius: u32,
    pub drop_rate: f64,
    pub breakdown_rate: f64,
    pub completed: usize,
    pub timesteps: u64,
    pub throughput: f64,
    pub avg_ratio: f64,
    pub max_ratio: f64,
    pub mean_iter_ms: f64,
    pub p95_iter_ms: f64,
    pub mean_disruption_iter_ms: f64,
}

pub const CSV_COLUMNS: [&str; 15] = [
    "seed",
    "algo",
    "agents",
    "tasks",
    "radius",
    "drop_rate",
    "breakdown_rate",
    "completed",
    "timesteps",
    "throughput",
    "avg_ratio",
    "max_ratio",
    "mean_iter_ms",
    "p95_iter_ms",
    "mean_disruption_iter_ms",
];

pub fn write_csv(out: impl std::io::Write, rows: &[MetricsRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
