//! Event log records, written as JSON lines.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::disruption::{Cause, Move};
use crate::error::LogError;
use crate::grid::Vertex;
use crate::ids::{AgentId, PodId, TaskId};
use crate::task::TaskKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Rhcr,
    Trhcr,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rhcr => "rhcr",
            Algorithm::Trhcr => "trhcr",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rhcr" => Ok(Algorithm::Rhcr),
            "trhcr" => Ok(Algorithm::Trhcr),
            _ => Err(format!("unknown algorithm `{s}`")),
        }
    }
}

/// A terraforming task proposal as recorded in the log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerraTaskRecord {
    pub pod: PodId,
    pub pickup: Vertex,
    pub delivery: Vertex,
    pub agent: Option<AgentId>,
}

/// Outcome of comparing the plain replan against the terraforming plan.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub plain_cost: u64,
    /// `None` when no terraforming task was proposed.
    pub terra_cost: Option<u64>,
    pub adopted_cost: u64,
    pub trapped: usize,
    pub tasks: Vec<TerraTaskRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventKind {
    RunStart {
        algo: Algorithm,
        seed: u64,
        tasks: usize,
        positions: Vec<Vertex>,
    },
    Move {
        moves: Vec<Move>,
    },
    /// The executor kept an agent in place instead of following its plan.
    Hold {
        agent: AgentId,
        target: Vertex,
        reason: HoldReason,
    },
    Pickup {
        agent: AgentId,
        task: TaskId,
        pod: PodId,
    },
    Deliver {
        agent: AgentId,
        task: TaskId,
        task_kind: TaskKind,
    },
    Restore {
        agent: AgentId,
        task: TaskId,
        task_kind: TaskKind,
        pickup_time: u64,
        ideal: u32,
    },
    DisruptionStart {
        vertex: Vertex,
        cause: Cause,
    },
    DisruptionEnd {
        vertex: Vertex,
    },
    DisruptionSkipped {
        vertex: Vertex,
        cause: Cause,
    },
    DisruptionResponse {
        new: usize,
        affected: usize,
        candidates: usize,
        trapped: usize,
    },
    Trapped {
        agents: Vec<AgentId>,
    },
    TerraformAdopted(Gate),
    TerraformRejected(Gate),
    RunEnd {
        timesteps: u64,
        completed: usize,
        incomplete: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HoldReason {
    Disrupted,
    Pod,
    Contested,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub timestep: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

pub fn write_events(mut out: impl Write, events: &[Event]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses a JSON-lines event log, naming the first bad record.
pub fn read_events(input: impl BufRead) -> Result<Vec<Event>, LogError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(&line).map_err(|e| LogError::Record {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip() {
        let events = vec![
            Event {
                timestep: 0,
                kind: EventKind::RunStart {
                    algo: Algorithm::Trhcr,
                    seed: 4,
                    tasks: 2,
                    positions: vec![Vertex(1)],
                },
            },
            Event {
                timestep: 3,
                kind: EventKind::TerraformRejected(Gate {
                    plain_cost: 10,
                    terra_cost: None,
                    adopted_cost: 10,
                    trapped: 0,
                    tasks: vec![],
                }),
            },
        ];
        let mut buf = Vec::new();
        write_events(&mut buf, &events).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"kind\":\"terraform-rejected\""));
        assert_eq!(read_events(&buf[..]).unwrap(), events);
    }
}
