//! Pickup-and-delivery tasks, task generation and greedy assignment.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{GridMap, Vertex};
use crate::ids::{AgentId, PodId, TaskId};
use crate::metrics::ideal_service_time;
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Standard,
    Terraforming,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskState {
    Queued,
    Enroute,
    Delivering,
    Restoring,
    Done,
}

/// Fetch a pod from its home, bring it to `delivery`, then return it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub pod: PodId,
    /// The pod's home cell.
    pub pickup: Vertex,
    pub delivery: Vertex,
    pub kind: TaskKind,
    pub state: TaskState,
    pub agent: Option<AgentId>,
    pub pickup_time: Option<u64>,
    pub dropoff_time: Option<u64>,
    pub ideal: u32,
}

impl Task {
    pub fn new(id: TaskId, pod: PodId, pickup: Vertex, delivery: Vertex, kind: TaskKind, ideal: u32) -> Self {
        Task {
            id,
            pod,
            pickup,
            delivery,
            kind,
            state: TaskState::Queued,
            agent: None,
            pickup_time: None,
            dropoff_time: None,
            ideal,
        }
    }

    /// Goals still ahead of the assigned agent.
    pub fn remaining_goals(&self) -> Vec<Vertex> {
        match self.state {
            TaskState::Queued | TaskState::Enroute => vec![self.pickup, self.delivery, self.pickup],
            TaskState::Delivering => vec![self.delivery, self.pickup],
            TaskState::Restoring => vec![self.pickup],
            TaskState::Done => vec![],
        }
    }
}

/// `count` standard tasks with a uniformly drawn pod and workstation each,
/// redrawn until the round trip is possible with every other pod at home.
pub fn generate_tasks(map: &GridMap, count: usize, seed: u64) -> Vec<Task> {
    let homes = map.pod_homes();
    let stations = map.workstations();
    if homes.is_empty() || stations.is_empty() {
        return Vec::new();
    }
    let mut rng = stream_rng(seed, Stream::Tasks);
    let mut cache = rustc_hash::FxHashMap::default();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > count * 100 + 1000 {
            log::warn!("task generation gave up after {attempts} draws");
            break;
        }
        let p = rng.random_range(0..homes.len());
        let d = stations[rng.random_range(0..stations.len())];
        let ideal = *cache
            .entry((p, d))
            .or_insert_with(|| ideal_service_time(map, homes[p], d));
        if let Some(ideal) = ideal {
            let id = TaskId(out.len() as u32);
            out.push(Task::new(id, PodId(p as u32), homes[p], d, TaskKind::Standard, ideal));
        }
    }
    out
}

/// Greedy assignment on a cost matrix `costs[agent][task]`: repeatedly
/// takes the globally cheapest remaining pair (ties by agent, then task
/// index) until agents or tasks run out.
pub fn greedy_assign(costs: &[Vec<u32>]) -> Vec<(usize, usize)> {
    let na = costs.len();
    let nt = costs.first().map_or(0, |r| r.len());
    let mut entries: Vec<(u32, usize, usize)> = Vec::with_capacity(na * nt);
    for (a, row) in costs.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            entries.push((c, a, t));
        }
    }
    entries.sort_unstable();
    let mut agent_used = vec![false; na];
    let mut task_used = vec![false; nt];
    let mut out = Vec::new();
    for (_, a, t) in entries {
        if !agent_used[a] && !task_used[t] {
            agent_used[a] = true;
            task_used[t] = true;
            out.push((a, t));
        }
    }
    out
}
