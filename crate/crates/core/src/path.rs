use serde::{Deserialize, Serialize};

use crate::grid::Vertex;
use crate::ids::Owner;

/// A time-indexed vertex sequence; `vertices[t]` is the position at
/// `start_time + t`. Past its end the owner waits at the last vertex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    pub owner: Owner,
    pub start_time: u64,
    pub vertices: Vec<Vertex>,
    /// Agent cost (timesteps until the final goal is reached and held,
    /// including the estimate past the window) or, for demi-agents, the
    /// number of moves.
    pub cost: u32,
    /// Set when the goal sequence was unreachable and the owner only holds.
    pub stuck: bool,
    /// Relative time at which the owner first stands on the pod cell it is
    /// going to lift.
    pub pickup: Option<(Vertex, u32)>,
}

impl Path {
    /// Builds a path whose cost is derived from the vertices alone: the
    /// number of moves for demi-agents, otherwise the length with trailing
    /// waits removed.
    pub fn from_vertices(owner: Owner, start_time: u64, vertices: Vec<Vertex>) -> Self {
        assert!(!vertices.is_empty(), "a path needs at least its start vertex");
        let cost = if owner.is_demi() {
            move_count(&vertices)
        } else {
            trimmed_len(&vertices)
        };
        Path {
            owner,
            start_time,
            vertices,
            cost,
            stuck: false,
            pickup: None,
        }
    }

    pub fn waiting(owner: Owner, start_time: u64, at: Vertex, len: usize) -> Self {
        Self::from_vertices(owner, start_time, vec![at; len.max(1)])
    }

    #[inline]
    pub fn at(&self, t: usize) -> Vertex {
        self.vertices[t.min(self.vertices.len() - 1)]
    }

    #[inline]
    pub fn start(&self) -> Vertex {
        self.vertices[0]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn moves(&self) -> u32 {
        move_count(&self.vertices)
    }

    /// Cost as an agent would pay it: timesteps, final waits excluded.
    pub fn agent_cost(&self) -> u32 {
        if self.owner.is_demi() {
            trimmed_len(&self.vertices)
        } else {
            self.cost
        }
    }

    /// Cost under terra-flowtime: demi-agents pay only for moves.
    pub fn terra_cost(&self) -> u32 {
        if self.owner.is_demi() {
            self.moves()
        } else {
            self.cost
        }
    }

    /// True if the path stands on any of `cells` at some `t < window`.
    pub fn visits_any(&self, cells: &[Vertex], window: usize) -> bool {
        (0..window.max(1)).any(|t| cells.contains(&self.at(t)))
    }

    /// The path with its first `k` steps dropped.
    pub fn advanced(&self, k: usize) -> Path {
        let k = k.min(self.vertices.len() - 1);
        let mut p = self.clone();
        p.vertices.drain(..k);
        p.start_time += k as u64;
        p.cost = p.cost.saturating_sub(k as u32);
        p.pickup = p
            .pickup
            .and_then(|(v, t)| (t as usize >= k).then(|| (v, t - k as u32)));
        p
    }

    pub fn padded(mut self, len: usize) -> Path {
        let last = *self.vertices.last().unwrap();
        while self.vertices.len() < len {
            self.vertices.push(last);
        }
        self
    }
}

fn move_count(vertices: &[Vertex]) -> u32 {
    vertices.windows(2).filter(|w| w[0] != w[1]).count() as u32
}

fn trimmed_len(vertices: &[Vertex]) -> u32 {
    let last = *vertices.last().unwrap();
    let mut end = vertices.len() - 1;
    while end > 0 && vertices[end - 1] == last {
        end -= 1;
    }
    end as u32
}

/// Sum of agent costs.
pub fn flowtime(paths: &[Path]) -> u64 {
    paths.iter().map(|p| p.agent_cost() as u64).sum()
}

/// Agent costs plus demi-agent move counts.
pub fn terra_flowtime(paths: &[Path]) -> u64 {
    paths.iter().map(|p| p.terra_cost() as u64).sum()
}

/// Maximum agent cost.
pub fn makespan(paths: &[Path]) -> u64 {
    paths
        .iter()
        .map(|p| p.agent_cost() as u64)
        .max()
        .unwrap_or(0)
}
