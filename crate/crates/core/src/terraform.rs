//! Disruption response helpers: who is affected, which pods may move, where
//! they go, and which agents are walled in.

use std::collections::BTreeSet;

use crate::grid::{CellClass, GridMap, Vertex, UNREACHABLE};
use crate::ids::{AgentId, Owner, PodId};
use crate::occupancy::{OccupancyView, PodState};
use crate::path::Path;
use crate::pbs::{twpbs, PbsProblem};

/// Agents whose path stands on a newly disrupted vertex within the window,
/// closed under "has priority over": if `a` is affected and `a ≺ b`, so is
/// `b`.
pub fn affected_agents(
    paths: &[Path],
    new: &[Vertex],
    priorities: &[(AgentId, AgentId)],
    window: u32,
) -> BTreeSet<AgentId> {
    let mut out = BTreeSet::new();
    let mut stack: Vec<AgentId> = Vec::new();
    for p in paths {
        if let Owner::Agent(a) = p.owner {
            if p.visits_any(new, window as usize + 1) && out.insert(a) {
                stack.push(a);
            }
        }
    }
    close_under_priorities(&mut out, stack, priorities);
    out
}

/// Extends `set` with every agent reachable from `stack` along
/// `(higher, lower)` pairs.
pub fn close_under_priorities(
    set: &mut BTreeSet<AgentId>,
    mut stack: Vec<AgentId>,
    priorities: &[(AgentId, AgentId)],
) {
    while let Some(a) = stack.pop() {
        for &(hi, lo) in priorities {
            if hi == a && set.insert(lo) {
                stack.push(lo);
            }
        }
    }
}

/// Resting, unassigned pods within graph distance `radius` of a newly
/// disrupted vertex, excluding pods that sit on a disrupted vertex.
pub fn candidate_obstacles(
    map: &GridMap,
    pods: &[PodState],
    view: &OccupancyView,
    new: &[Vertex],
    radius: u32,
) -> Vec<PodId> {
    if radius == 0 {
        return Vec::new();
    }
    let mut out: Vec<PodId> = pods
        .iter()
        .filter(|p| p.assigned.is_none())
        .filter_map(|p| p.resting_vertex().map(|v| (p.id, v)))
        .filter(|&(_, v)| !view.is_disrupted(v))
        .filter(|&(_, v)| {
            new.iter()
                .any(|&d| map.graph_distance(v, d).is_some_and(|x| x <= radius))
        })
        .map(|(id, _)| id)
        .collect();
    out.sort();
    out
}

/// Closest usable reserved vertex to `from`, ties by (row, col). Reserved
/// cells for which `unusable` holds are skipped; when none is left, the
/// closest usable floor cell next to a reserved cell is returned instead.
pub fn nearest_reserved(
    map: &GridMap,
    from: Vertex,
    unusable: impl Fn(Vertex) -> bool,
) -> Option<Vertex> {
    let reserved = map.reserved();
    let pick = |cands: &mut dyn Iterator<Item = Vertex>| {
        cands
            .filter(|&v| !unusable(v))
            .min_by_key(|&v| (map.graph_distance(from, v).unwrap_or(UNREACHABLE), v))
    };
    if let Some(v) = pick(&mut reserved.iter().copied()) {
        return Some(v);
    }
    let mut adjacent: Vec<Vertex> = reserved
        .iter()
        .flat_map(|&r| map.neighbors(r))
        .filter(|&v| map.class(v) == CellClass::Floor)
        .collect();
    adjacent.sort();
    adjacent.dedup();
    let v = pick(&mut adjacent.into_iter());
    if v.is_some() {
        log::debug!("every reserved vertex is taken; parking next to the reserved strip");
    }
    v
}

/// True when no route from `from` to `goal` exists with the blocked cells
/// of `view` (for `agent`) treated as permanent.
pub fn is_trapped(map: &GridMap, view: &OccupancyView, agent: AgentId, from: Vertex, goal: Vertex) -> bool {
    if from == goal {
        return false;
    }
    let d = map.bfs_distances(from, |v| v == from || !view.blocked_at(v, agent));
    d[goal.index()] == UNREACHABLE
}

/// Unassigned resting pods walling `agent` off from `goal`. Pods touching
/// both the region reachable from `from` and the region reachable from
/// `goal` come first: lifting any one of them joins the two. When no single
/// pod does, the wall of the smaller region is returned. Blocked cells are
/// treated as permanent.
pub fn wall_pods(map: &GridMap, view: &OccupancyView, agent: AgentId, from: Vertex, goal: Vertex) -> Vec<PodId> {
    let near = map.bfs_distances(from, |v| v == from || !view.blocked_at(v, agent));
    let far = map.bfs_distances(goal, |v| v == goal || !view.blocked_at(v, agent));
    let liftable = |u: Vertex| {
        (!view.is_disrupted(u))
            .then(|| view.pod_at(u))
            .flatten()
            .filter(|&p| view.assigned_agent(p).is_none())
    };
    let touches = |u: Vertex, d: &[u32]| map.neighbors(u).any(|w| d[w.index()] != UNREACHABLE);
    let mut out: Vec<PodId> = map
        .vertices()
        .filter(|&u| near[u.index()] == UNREACHABLE && far[u.index()] == UNREACHABLE)
        .filter(|&u| touches(u, &near) && touches(u, &far))
        .filter_map(liftable)
        .collect();
    if out.is_empty() {
        let size = |d: &[u32]| d.iter().filter(|&&x| x != UNREACHABLE).count();
        let smaller = if size(&far) < size(&near) { &far } else { &near };
        out = map
            .vertices()
            .filter(|&u| smaller[u.index()] == UNREACHABLE && touches(u, smaller))
            .filter_map(liftable)
            .collect();
    }
    out.sort();
    out.dedup();
    out
}

/// A pod to relocate and where it should go.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TerraformProposal {
    pub pod: PodId,
    pub from: Vertex,
    pub to: Vertex,
}

/// Runs TW-PBS with the candidate pods as demi-agents and turns the
/// demi-agents that move into relocations towards their nearest usable
/// reserved vertex, ordered by pod id. Only pods whose cell an agent path
/// then crosses are kept, unless no moved pod is crossed at all. Each reserved vertex is handed out
/// at most once.
pub fn terraforming_tasks(
    problem: &PbsProblem<'_>,
    unusable: impl Fn(Vertex) -> bool,
) -> Vec<TerraformProposal> {
    if problem.agents.is_empty() || problem.demis.is_empty() {
        return Vec::new();
    }
    let solution = twpbs(problem);
    let na = problem.agents.len();
    let mut moved: Vec<(PodId, Vertex)> = problem
        .demis
        .iter()
        .zip(&solution.paths[na..])
        .filter(|(_, path)| path.moves() >= 1)
        .map(|(&d, _)| d)
        .collect();
    let crossed: Vec<(PodId, Vertex)> = moved
        .iter()
        .copied()
        .filter(|&(_, v)| solution.paths[..na].iter().any(|p| p.vertices.contains(&v)))
        .collect();
    if !crossed.is_empty() {
        moved = crossed;
    }
    moved.sort();
    let mut taken: Vec<Vertex> = Vec::new();
    let mut out = Vec::new();
    for (pod, from) in moved {
        let to = nearest_reserved(problem.map, from, |v| unusable(v) || taken.contains(&v));
        if let Some(to) = to {
            taken.push(to);
            out.push(TerraformProposal { pod, from, to });
        }
    }
    out
}
