//! Single-owner space-time search against reservations of higher-priority
//! paths.
//!
//! Agents minimise time-to-completion of their goal sequence: within the
//! window every step costs one timestep, and a search that reaches the window
//! boundary is charged `window + h` with `h` the relaxed remaining distance.
//! Demi-agents minimise their number of moves.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::rc::Rc;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::PlanError;
use crate::grid::{GridMap, Vertex, UNREACHABLE};
use crate::ids::{AgentId, Owner, PodId};
use crate::occupancy::OccupancyView;
use crate::path::Path;
use crate::reservation::ReservationTable;

/// Planning input for one agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanAgent {
    pub agent: AgentId,
    pub start: Vertex,
    /// Ordered goals; an idle agent has its own position as sole goal.
    pub goals: Vec<Vertex>,
    /// Resting pod cell this agent is allowed to enter to lift the pod.
    pub pickup: Option<Vertex>,
}

impl PlanAgent {
    pub fn idle(agent: AgentId, at: Vertex) -> Self {
        PlanAgent {
            agent,
            start: at,
            goals: vec![at],
            pickup: None,
        }
    }
}

/// Shared, per-call planning state: the occupancy snapshot, the window and
/// a cache of relaxed distance tables keyed by goal vertex.
pub struct PlanContext<'a> {
    map: &'a GridMap,
    view: &'a OccupancyView,
    window: u32,
    relaxed: Vec<bool>,
    distances: FxHashMap<Vertex, Rc<Vec<u32>>>,
}

impl<'a> PlanContext<'a> {
    /// `extra_passable` lists cells that some owner may legally stand on
    /// even though a resting pod occupies them (typically every start cell).
    pub fn new(
        map: &'a GridMap,
        view: &'a OccupancyView,
        window: u32,
        extra_passable: impl IntoIterator<Item = Vertex>,
    ) -> Self {
        let mut relaxed: Vec<bool> = map
            .vertices()
            .map(|v| {
                !view.is_disrupted(v)
                    && view
                        .pod_at(v)
                        .is_none_or(|p| view.assigned_agent(p).is_some())
            })
            .collect();
        for v in extra_passable {
            if !view.is_disrupted(v) {
                relaxed[v.index()] = true;
            }
        }
        PlanContext {
            map,
            view,
            window,
            relaxed,
            distances: FxHashMap::default(),
        }
    }

    pub fn map(&self) -> &'a GridMap {
        self.map
    }

    pub fn view(&self) -> &'a OccupancyView {
        self.view
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    /// Relaxed distances from every vertex to `goal`; `UNREACHABLE` where no
    /// route exists even when reservations are ignored.
    pub fn distances_to(&mut self, goal: Vertex) -> Rc<Vec<u32>> {
        if let Some(d) = self.distances.get(&goal) {
            return d.clone();
        }
        let relaxed = &self.relaxed;
        let d = if relaxed[goal.index()] {
            Rc::new(self.map.bfs_distances(goal, |v| relaxed[v.index()]))
        } else {
            Rc::new(vec![UNREACHABLE; self.map.num_vertices()])
        };
        self.distances.insert(goal, d.clone());
        d
    }
}

struct Heuristic {
    tables: Vec<Rc<Vec<u32>>>,
    tails: Vec<u32>,
}

impl Heuristic {
    fn new(ctx: &mut PlanContext<'_>, goals: &[Vertex]) -> Self {
        let tables: Vec<_> = goals.iter().map(|&g| ctx.distances_to(g)).collect();
        let n = goals.len();
        let mut tails = vec![0u32; n];
        for k in (0..n.saturating_sub(1)).rev() {
            let step = tables[k + 1][goals[k].index()];
            tails[k] = if step == UNREACHABLE || tails[k + 1] == UNREACHABLE {
                UNREACHABLE
            } else {
                tails[k + 1] + step
            };
        }
        Heuristic { tables, tails }
    }

    /// Remaining relaxed distance with `k` goals already reached. After the
    /// last goal, the distance back to it.
    #[inline]
    fn h(&self, v: Vertex, k: usize) -> u32 {
        let n = self.tables.len();
        if k >= n {
            return self.tables[n - 1][v.index()];
        }
        let d = self.tables[k][v.index()];
        if d == UNREACHABLE || self.tails[k] == UNREACHABLE {
            UNREACHABLE
        } else {
            d + self.tails[k]
        }
    }
}

fn advance_goals(goals: &[Vertex], mut k: usize, v: Vertex) -> usize {
    while k < goals.len() && goals[k] == v {
        k += 1;
    }
    k
}

/// Lower bound on the agent cost ignoring every obstacle.
pub fn manhattan_estimate(map: &GridMap, start: Vertex, goals: &[Vertex]) -> u32 {
    let mut total = 0;
    let mut at = start;
    for &g in goals {
        total += map.graph_distance(at, g).unwrap_or(0);
        at = g;
    }
    total
}

#[derive(Clone, Copy)]
struct Node {
    v: Vertex,
    t: u32,
    k: u8,
    waits: u32,
    parent: u32,
}

/// Minimum-cost space-time path for one agent.
///
/// Resting pods block the agent except on its start cell, its own pickup
/// cell and cells whose pod a reserved path lifts (from the step after the
/// lift). Reservations apply to timesteps `< window`.
pub fn plan_agent_path(
    ctx: &mut PlanContext<'_>,
    agent: &PlanAgent,
    reservations: &ReservationTable,
) -> Result<Path, PlanError> {
    let map = ctx.map;
    if ctx.window == 0 {
        return Err(PlanError::ZeroWindow);
    }
    for &v in std::iter::once(&agent.start).chain(&agent.goals) {
        if !map.contains(v) {
            return Err(PlanError::OffMap(v.0));
        }
    }
    if agent.goals.is_empty() {
        return Err(PlanError::NoGoals);
    }
    let owner = Owner::Agent(agent.agent);
    let heuristic = Heuristic::new(ctx, &agent.goals);
    let k0 = advance_goals(&agent.goals, 0, agent.start);
    if heuristic.h(agent.start, k0) == UNREACHABLE {
        // Goal out of reach: keep the agent near its cell, able to dodge.
        let fallback = PlanAgent {
            goals: vec![agent.start],
            ..agent.clone()
        };
        let mut path = match search(ctx, &fallback, reservations) {
            Some(p) => p,
            None => hold(owner, ctx, agent.start),
        };
        path.stuck = true;
        path.pickup = None;
        path.cost = ctx.window + manhattan_estimate(map, agent.start, &agent.goals);
        return Ok(path);
    }
    Ok(match search(ctx, agent, reservations) {
        Some(p) => p,
        None => {
            let mut p = hold(owner, ctx, agent.start);
            p.stuck = true;
            p.cost = ctx.window + manhattan_estimate(map, agent.start, &agent.goals);
            p
        }
    })
}

fn hold(owner: Owner, ctx: &PlanContext<'_>, at: Vertex) -> Path {
    Path::waiting(owner, ctx.view.timestep, at, ctx.window as usize + 1)
}

fn search(
    ctx: &mut PlanContext<'_>,
    agent: &PlanAgent,
    res: &ReservationTable,
) -> Option<Path> {
    let heuristic = Heuristic::new(ctx, &agent.goals);
    let map = ctx.map;
    let view = ctx.view;
    let window = ctx.window;
    let goals = &agent.goals;
    let n = goals.len();
    let last_goal = goals[n - 1];

    let passable = |v: Vertex, t: u32| -> bool {
        if view.is_disrupted(v) {
            return false;
        }
        if view.pod_at(v).is_some()
            && v != agent.start
            && Some(v) != agent.pickup
            && !res.released_at(v).is_some_and(|r| t >= r)
        {
            return false;
        }
        true
    };

    let mut nodes: Vec<Node> = Vec::new();
    let mut seen: FxHashSet<(Vertex, u32, u8)> = FxHashSet::default();
    // (f, h, waits, vertex, t, k) -> node index
    let mut open: BinaryHeap<Reverse<(u32, u32, u32, Vertex, u32, u8, u32)>> = BinaryHeap::new();

    let k0 = advance_goals(goals, 0, agent.start) as u8;
    let h0 = heuristic.h(agent.start, k0 as usize);
    nodes.push(Node {
        v: agent.start,
        t: 0,
        k: k0,
        waits: 0,
        parent: u32::MAX,
    });
    seen.insert((agent.start, 0, k0));
    open.push(Reverse((h0, h0, 0, agent.start, 0, k0, 0)));

    while let Some(Reverse((f, _h, _w, v, t, k, idx))) = open.pop() {
        let done = (k as usize == n && v == last_goal && res.free_from(v, t)) || t == window;
        if done {
            return Some(reconstruct(agent, &nodes, idx, f, ctx));
        }
        let node = nodes[idx as usize];
        let moves = std::iter::once(v).chain(map.neighbors(v));
        for u in moves {
            let nt = t + 1;
            if !passable(u, nt) || res.vertex_reserved(u, nt) || res.edge_blocked(v, u, t) {
                continue;
            }
            let nk = advance_goals(goals, k as usize, u) as u8;
            if !seen.insert((u, nt, nk)) {
                continue;
            }
            let h = heuristic.h(u, nk as usize);
            if h == UNREACHABLE {
                continue;
            }
            let waits = node.waits + u32::from(u == v);
            nodes.push(Node {
                v: u,
                t: nt,
                k: nk,
                waits,
                parent: idx,
            });
            let nidx = (nodes.len() - 1) as u32;
            open.push(Reverse((nt + h, h, waits, u, nt, nk, nidx)));
        }
    }
    None
}

fn reconstruct(agent: &PlanAgent, nodes: &[Node], idx: u32, cost: u32, ctx: &PlanContext<'_>) -> Path {
    let mut chain = Vec::new();
    let mut i = idx;
    while i != u32::MAX {
        chain.push(nodes[i as usize]);
        i = nodes[i as usize].parent;
    }
    chain.reverse();
    let mut pickup = None;
    if let Some(cell) = agent.pickup {
        if agent.goals.first() == Some(&cell) {
            pickup = chain.iter().find(|n| n.k >= 1).map(|n| (cell, n.t));
        }
    }
    let vertices: Vec<Vertex> = chain.iter().map(|n| n.v).collect();
    let mut path = Path::from_vertices(Owner::Agent(agent.agent), ctx.view.timestep, vertices)
        .padded(ctx.window as usize + 1);
    path.cost = cost;
    path.pickup = pickup;
    path
}

/// Fewest-moves path for a demi-agent that lets it sit out the window
/// without violating reservations. Ties prefer staying near its start.
pub fn plan_demi_path(
    ctx: &PlanContext<'_>,
    pod: PodId,
    start: Vertex,
    res: &ReservationTable,
) -> Path {
    let map = ctx.map;
    let view = ctx.view;
    let window = ctx.window;
    let owner = Owner::Demi(pod);
    let passable = |v: Vertex, t: u32| -> bool {
        !view.is_disrupted(v)
            && (view.pod_at(v).is_none()
                || v == start
                || res.released_at(v).is_some_and(|r| t >= r))
    };
    let home_dist = |v: Vertex| map.graph_distance(v, start).unwrap_or(0);

    let mut parents: FxHashMap<(Vertex, u32), (Vertex, u32)> = FxHashMap::default();
    let mut best: FxHashMap<(Vertex, u32), u32> = FxHashMap::default();
    let mut open: BinaryHeap<Reverse<(u32, u32, u32, Vertex)>> = BinaryHeap::new();
    best.insert((start, 0), 0);
    open.push(Reverse((0, 0, 0, start)));
    while let Some(Reverse((moves, _d, t, v))) = open.pop() {
        if best.get(&(v, t)).is_some_and(|&b| b < moves) {
            continue;
        }
        if res.free_from(v, t) || t == window {
            let mut vertices = vec![v];
            let mut key = (v, t);
            while let Some(&p) = parents.get(&key) {
                vertices.push(p.0);
                key = p;
            }
            vertices.reverse();
            let mut path = Path::from_vertices(owner, view.timestep, vertices)
                .padded(window as usize + 1);
            path.cost = moves;
            return path;
        }
        for u in std::iter::once(v).chain(map.neighbors(v)) {
            let nt = t + 1;
            if !passable(u, nt) || res.vertex_reserved(u, nt) || res.edge_blocked(v, u, t) {
                continue;
            }
            let nm = moves + u32::from(u != v);
            if best.get(&(u, nt)).is_some_and(|&b| b <= nm) {
                continue;
            }
            best.insert((u, nt), nm);
            parents.insert((u, nt), (v, t));
            open.push(Reverse((nm, home_dist(u), nt, u)));
        }
    }
    let mut p = Path::waiting(owner, view.timestep, start, window as usize + 1);
    p.stuck = true;
    p
}
