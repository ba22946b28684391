//! The lifelong loop: task intake, windowed replanning, disruption
//! response, execution.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::disruption::{Disruption, DisruptionBook, DisruptionSource, Move};
use crate::error::ConfigError;
use crate::events::{Algorithm, Event, EventKind, Gate, HoldReason, TerraTaskRecord};
use crate::grid::{CellClass, GridMap, Vertex};
use crate::ids::{AgentId, Owner, TaskId};
use crate::metrics::StepTiming;
use crate::occupancy::{pods_for, OccupancyView, PodLocation, PodState};
use crate::path::Path;
use crate::pbs::{wpbs, PbsProblem, DEFAULT_NODE_LIMIT};
use crate::planner::PlanAgent;
use crate::task::{greedy_assign, Task, TaskKind, TaskState};
use crate::terraform::{
    affected_agents, candidate_obstacles, close_under_priorities, wall_pods, is_trapped, terraforming_tasks,
    TerraformProposal,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub window: u32,
    pub replan_period: u32,
    pub radius: u32,
    pub max_timesteps: u64,
    pub node_limit: usize,
    /// Carry the previous step's priority pairs into the next planning call.
    pub retain_priorities: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            window: 20,
            replan_period: 1,
            radius: 8,
            max_timesteps: 20_000,
            node_limit: DEFAULT_NODE_LIMIT,
            retain_priorities: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.replan_period == 0 || self.window < self.replan_period {
            return Err(ConfigError::Invalid(format!(
                "need window >= replan period >= 1, got window {} and period {}",
                self.window, self.replan_period
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub position: Vertex,
    pub carrying: Option<crate::ids::PodId>,
    pub task: Option<TaskId>,
}

/// A joint plan: one path per agent, indexed by agent id.
#[derive(Clone, Debug)]
pub struct Plan {
    pub paths: Vec<Path>,
    pub priorities: Vec<(AgentId, AgentId)>,
}

impl Plan {
    pub fn cost(&self) -> u64 {
        self.paths.iter().map(|p| p.cost as u64).sum()
    }
}

/// Everything a terraforming decision may change; cloned to evaluate the
/// alternative plan.
#[derive(Clone, Debug)]
pub struct World {
    pub agents: Vec<AgentState>,
    pub pods: Vec<PodState>,
    pub tasks: Vec<Task>,
    pub queue: VecDeque<TaskId>,
    priorities: Vec<(AgentId, AgentId)>,
    wipe: BTreeSet<AgentId>,
}

impl World {
    pub fn view(&self, map: &GridMap, t: u64, disrupted: &[Vertex]) -> OccupancyView {
        OccupancyView::new(map, t, &self.pods, disrupted.iter().copied())
    }

    fn pod_available(&self, pod: crate::ids::PodId) -> bool {
        let p = &self.pods[pod.index()];
        p.location == PodLocation::Home && p.assigned.is_none()
    }

    fn assign(&mut self, agent: AgentId, task: TaskId) {
        let tk = &mut self.tasks[task.index()];
        tk.state = TaskState::Enroute;
        tk.agent = Some(agent);
        self.pods[tk.pod.index()].assigned = Some(agent);
        self.agents[agent.index()].task = Some(task);
        self.wipe.insert(agent);
    }

    /// Greedy assignment of queued tasks to agents without a task. Only the
    /// first |free agents| tasks whose pod is available are considered.
    pub fn assign_queued(&mut self, map: &GridMap) -> Vec<AgentId> {
        let free: Vec<AgentId> = self
            .agents
            .iter()
            .filter(|a| a.task.is_none())
            .map(|a| a.id)
            .collect();
        if free.is_empty() || self.queue.is_empty() {
            return Vec::new();
        }
        let mut eligible: Vec<TaskId> = Vec::new();
        for &id in &self.queue {
            if eligible.len() == free.len() {
                break;
            }
            let pod = self.tasks[id.index()].pod;
            if self.pod_available(pod) && !eligible.iter().any(|&e| self.tasks[e.index()].pod == pod) {
                eligible.push(id);
            }
        }
        let costs: Vec<Vec<u32>> = free
            .iter()
            .map(|a| {
                let pos = self.agents[a.index()].position;
                eligible
                    .iter()
                    .map(|t| map.graph_distance(pos, self.tasks[t.index()].pickup).unwrap_or(u32::MAX))
                    .collect()
            })
            .collect();
        let mut assigned = Vec::new();
        for (i, j) in greedy_assign(&costs) {
            self.assign(free[i], eligible[j]);
            assigned.push(free[i]);
        }
        self.queue.retain(|id| self.tasks[id.index()].state == TaskState::Queued);
        assigned
    }

    /// Hands relocation tasks to free or not-yet-loaded agents, before any
    /// queued task. A loaded agent's own task goes back to the queue head.
    /// Returns the helpers; proposals nobody could take are dropped.
    pub fn assign_terraforming(&mut self, map: &GridMap, proposals: &[TerraformProposal]) -> Vec<AgentId> {
        let eligible: Vec<AgentId> = self
            .agents
            .iter()
            .filter(|a| match a.task {
                None => true,
                Some(t) => {
                    let tk = &self.tasks[t.index()];
                    tk.state == TaskState::Enroute && tk.kind == TaskKind::Standard
                }
            })
            .map(|a| a.id)
            .collect();
        let costs: Vec<Vec<u32>> = eligible
            .iter()
            .map(|a| {
                let pos = self.agents[a.index()].position;
                proposals
                    .iter()
                    .map(|p| map.graph_distance(pos, p.from).unwrap_or(u32::MAX))
                    .collect()
            })
            .collect();
        let mut pairs = greedy_assign(&costs);
        pairs.sort_by_key(|&(_, j)| j);
        let mut helpers = Vec::new();
        for (i, j) in pairs {
            let agent = eligible[i];
            if let Some(old) = self.agents[agent.index()].task {
                let tk = &mut self.tasks[old.index()];
                tk.state = TaskState::Queued;
                tk.agent = None;
                let pod = tk.pod;
                self.pods[pod.index()].assigned = None;
                self.agents[agent.index()].task = None;
                self.queue.push_front(old);
            }
            let p = proposals[j];
            let id = TaskId(self.tasks.len() as u32);
            let ideal = 2 * map.graph_distance(p.from, p.to).unwrap_or(0);
            self.tasks.push(Task::new(id, p.pod, p.from, p.to, TaskKind::Terraforming, ideal));
            self.assign(agent, id);
            helpers.push(agent);
        }
        helpers
    }

    pub fn plan_agent(&self, a: AgentId) -> PlanAgent {
        let agent = &self.agents[a.index()];
        match agent.task {
            None => PlanAgent::idle(a, agent.position),
            Some(t) => {
                let tk = &self.tasks[t.index()];
                PlanAgent {
                    agent: a,
                    start: agent.position,
                    goals: tk.remaining_goals(),
                    pickup: (tk.state == TaskState::Enroute).then_some(tk.pickup),
                }
            }
        }
    }

    pub fn current_goal(&self, a: AgentId) -> Option<Vertex> {
        let t = self.agents[a.index()].task?;
        self.tasks[t.index()].remaining_goals().first().copied()
    }

    pub fn trapped_agents(&self, map: &GridMap, view: &OccupancyView) -> Vec<AgentId> {
        self.agents
            .iter()
            .filter(|a| {
                self.current_goal(a.id)
                    .is_some_and(|g| is_trapped(map, view, a.id, a.position, g))
            })
            .map(|a| a.id)
            .collect()
    }

    fn plan_all(&mut self, map: &GridMap, view: &OccupancyView, config: &SimConfig) -> Plan {
        let initial = if config.retain_priorities {
            let wipe = &self.wipe;
            self.priorities
                .iter()
                .filter(|(h, l)| !wipe.contains(h) && !wipe.contains(l))
                .map(|&(h, l)| (Owner::Agent(h), Owner::Agent(l)))
                .collect()
        } else {
            Vec::new()
        };
        self.wipe.clear();
        let mut problem = PbsProblem::new(map, view, config.window);
        problem.agents = self.agents.iter().map(|a| self.plan_agent(a.id)).collect();
        let seeded = !initial.is_empty();
        problem.initial = initial;
        problem.node_limit = config.node_limit;
        let mut sol = wpbs(&problem);
        if seeded && !sol.complete {
            problem.initial.clear();
            sol = wpbs(&problem);
        }
        Plan {
            paths: sol.paths,
            priorities: agent_pairs(&sol.priorities),
        }
    }

    /// Replans `subset` against the other agents' paths in `plan`, keeping
    /// their relative priorities and adding `seeded` pairs.
    fn replan_subset(
        &self,
        map: &GridMap,
        view: &OccupancyView,
        plan: &Plan,
        subset: &BTreeSet<AgentId>,
        seeded: &[(AgentId, AgentId)],
        config: &SimConfig,
    ) -> Plan {
        let mut problem = PbsProblem::new(map, view, config.window);
        problem.agents = subset.iter().map(|&a| self.plan_agent(a)).collect();
        problem.fixed = plan
            .paths
            .iter()
            .filter(|p| p.owner.agent().is_some_and(|a| !subset.contains(&a)))
            .cloned()
            .collect();
        problem.initial = seeded
            .iter()
            .chain(plan.priorities.iter().filter(|(h, l)| subset.contains(h) && subset.contains(l)))
            .map(|&(h, l)| (Owner::Agent(h), Owner::Agent(l)))
            .collect();
        problem.node_limit = config.node_limit;
        let sol = wpbs(&problem);
        let mut paths = plan.paths.clone();
        for p in sol.paths {
            let a = p.owner.agent().expect("only agents are replanned");
            paths[a.index()] = p;
        }
        let mut priorities: Vec<(AgentId, AgentId)> = plan
            .priorities
            .iter()
            .filter(|(_, l)| !subset.contains(l))
            .copied()
            .collect();
        priorities.extend(agent_pairs(&sol.priorities));
        Plan { paths, priorities }
    }

    pub fn finished(&self) -> bool {
        self.queue.is_empty() && self.agents.iter().all(|a| a.task.is_none())
    }
}

fn agent_pairs(pairs: &[(Owner, Owner)]) -> Vec<(AgentId, AgentId)> {
    pairs
        .iter()
        .filter_map(|&(h, l)| Some((h.agent()?, l.agent()?)))
        .collect()
}

/// Final next positions given the planned ones. Agents are held when their
/// next cell is blocked for them, when two agents target one cell (all but
/// the lowest-index mover hold), when they would enter a cell whose
/// occupant stays, or when two agents would swap.
pub fn resolve_moves(
    map: &GridMap,
    current: &[Vertex],
    desired: &[Vertex],
    blocked: impl Fn(usize, Vertex) -> Option<HoldReason>,
) -> (Vec<Vertex>, Vec<(usize, HoldReason)>) {
    let n = current.len();
    let mut next = desired.to_vec();
    let mut holds = Vec::new();
    for i in 0..n {
        if next[i] != current[i] {
            if !map.adjacent(current[i], next[i]) {
                next[i] = current[i];
                holds.push((i, HoldReason::Contested));
            } else if let Some(r) = blocked(i, next[i]) {
                next[i] = current[i];
                holds.push((i, r));
            }
        }
    }
    loop {
        let mut changed = false;
        let mut at: rustc_hash::FxHashMap<Vertex, Vec<usize>> = rustc_hash::FxHashMap::default();
        for i in 0..n {
            at.entry(next[i]).or_default().push(i);
        }
        let mut cells: Vec<_> = at.into_iter().filter(|(_, v)| v.len() > 1).collect();
        cells.sort();
        for (v, ids) in cells {
            let stayer = ids.iter().any(|&i| current[i] == v);
            let mut kept = stayer;
            for &i in &ids {
                if current[i] == v {
                    continue;
                }
                if kept {
                    next[i] = current[i];
                    holds.push((i, HoldReason::Contested));
                    changed = true;
                } else {
                    kept = true;
                }
            }
        }
        let index_of: rustc_hash::FxHashMap<Vertex, usize> =
            (0..n).map(|i| (current[i], i)).collect();
        for i in 0..n {
            if next[i] == current[i] {
                continue;
            }
            if let Some(&j) = index_of.get(&next[i]) {
                if j != i && next[j] == current[i] {
                    next[i] = current[i];
                    next[j] = current[j];
                    holds.push((i, HoldReason::Contested));
                    holds.push((j, HoldReason::Contested));
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (next, holds)
}

/// What a finished run leaves behind.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub algo: Algorithm,
    pub seed: u64,
    pub events: Vec<Event>,
    pub trace: Vec<Disruption>,
    pub timings: Vec<StepTiming>,
    pub timesteps: u64,
    pub completed: usize,
    pub all_pods_home: bool,
}

pub struct Simulation {
    map: Arc<GridMap>,
    config: SimConfig,
    algo: Algorithm,
    seed: u64,
    t: u64,
    world: World,
    book: DisruptionBook,
    source: DisruptionSource,
    trace: Vec<Disruption>,
    events: Vec<Event>,
    timings: Vec<StepTiming>,
    committed: Option<Plan>,
    replan_due: bool,
}

impl Simulation {
    pub fn new(
        map: Arc<GridMap>,
        tasks: Vec<Task>,
        starts: &[Vertex],
        algo: Algorithm,
        config: SimConfig,
        source: DisruptionSource,
        seed: u64,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        if algo == Algorithm::Trhcr && config.radius > 0 && map.reserved().is_empty() {
            return Err(ConfigError::Invalid(
                "terraforming needs at least one reserved vertex".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for &s in starts {
            if !map.contains(s) || map.class(s) == CellClass::PodHome || !seen.insert(s) {
                return Err(ConfigError::Invalid(format!("bad start vertex {}", s.0)));
            }
        }
        let agents = starts
            .iter()
            .enumerate()
            .map(|(i, &v)| AgentState {
                id: AgentId(i as u32),
                position: v,
                carrying: None,
                task: None,
            })
            .collect();
        let pods = pods_for(&map);
        let queue = tasks.iter().map(|t| t.id).collect();
        let world = World {
            agents,
            pods,
            tasks,
            queue,
            priorities: Vec::new(),
            wipe: BTreeSet::new(),
        };
        let mut sim = Simulation {
            map,
            config,
            algo,
            seed,
            t: 0,
            world,
            book: DisruptionBook::default(),
            source,
            trace: Vec::new(),
            events: Vec::new(),
            timings: Vec::new(),
            committed: None,
            replan_due: true,
        };
        sim.emit(EventKind::RunStart {
            algo,
            seed,
            tasks: sim.world.tasks.len(),
            positions: starts.to_vec(),
        });
        sim.receive_disruptions(&[]);
        Ok(sim)
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn positions(&self) -> Vec<Vertex> {
        self.world.agents.iter().map(|a| a.position).collect()
    }

    pub fn finished(&self) -> bool {
        self.world.finished()
    }

    fn emit(&mut self, kind: EventKind) {
        self.events.push(Event {
            timestep: self.t,
            kind,
        });
    }

    /// Steps until every task is done or the step budget runs out.
    pub fn run(mut self) -> RunOutput {
        while !self.finished() && self.t < self.config.max_timesteps {
            self.step();
        }
        self.finish()
    }

    pub fn finish(mut self) -> RunOutput {
        let standard = |t: &&Task| t.kind == TaskKind::Standard;
        let completed = self
            .world
            .tasks
            .iter()
            .filter(standard)
            .filter(|t| t.state == TaskState::Done)
            .count();
        let incomplete = self.world.tasks.iter().filter(standard).count() - completed;
        self.emit(EventKind::RunEnd {
            timesteps: self.t,
            completed,
            incomplete,
        });
        let all_pods_home = self.world.pods.iter().all(|p| p.location == PodLocation::Home);
        RunOutput {
            algo: self.algo,
            seed: self.seed,
            events: self.events,
            trace: self.trace,
            timings: self.timings,
            timesteps: self.t,
            completed,
            all_pods_home,
        }
    }

    /// One timestep: plan, respond to new disruptions, execute.
    pub fn step(&mut self) {
        let t = self.t;
        let map = self.map.clone();
        for d in self.book.expire(t) {
            self.emit(EventKind::DisruptionEnd { vertex: d.vertex });
        }
        let started: Vec<Disruption> = self.book.started(t).copied().collect();
        for d in &started {
            self.emit(EventKind::DisruptionStart {
                vertex: d.vertex,
                cause: d.cause,
            });
        }
        let obs = self.book.observe(t);
        if !self.world.assign_queued(&map).is_empty() {
            self.replan_due = true;
        }

        let clock = Instant::now();
        let old: Vec<Vertex> = obs
            .active
            .iter()
            .copied()
            .filter(|v| !obs.new.contains(v))
            .collect();
        let period = self.config.replan_period as u64;
        let mut plan = match self.committed.take() {
            Some(prev) if !self.replan_due && t % period != 0 => Plan {
                paths: prev.paths.iter().map(|p| p.advanced(1)).collect(),
                priorities: prev.priorities,
            },
            _ => {
                let view = self.world.view(&map, t, &old);
                self.world.plan_all(&map, &view, &self.config)
            }
        };
        self.replan_due = false;

        let response = Instant::now();
        if !obs.new.is_empty() {
            let view = self.world.view(&map, t, &obs.active);
            let trapped = self.world.trapped_agents(&map, &view);
            if !trapped.is_empty() {
                self.emit(EventKind::Trapped {
                    agents: trapped.clone(),
                });
            }
            let mut affected = affected_agents(&plan.paths, &obs.new, &plan.priorities, self.config.window);
            let extra: Vec<AgentId> = trapped.iter().copied().filter(|a| affected.insert(*a)).collect();
            close_under_priorities(&mut affected, extra, &plan.priorities);
            if !affected.is_empty() {
                plan = self
                    .world
                    .replan_subset(&map, &view, &plan, &affected, &[], &self.config);
            }
            let mut candidates = 0;
            if self.algo == Algorithm::Trhcr {
                let (n, gate, adopted) = self.terraform(&map, &obs, &affected, &trapped, &mut plan);
                candidates = n;
                self.emit(if adopted {
                    EventKind::TerraformAdopted(gate)
                } else {
                    EventKind::TerraformRejected(gate)
                });
            }
            self.emit(EventKind::DisruptionResponse {
                new: obs.new.len(),
                affected: affected.len(),
                candidates,
                trapped: trapped.len(),
            });
        }
        let response_ms = response.elapsed().as_secs_f64() * 1e3;
        let plan_ms = clock.elapsed().as_secs_f64() * 1e3;
        if plan_ms > 50.0 {
            log::debug!(
                "t={t} planning took {plan_ms:.1} ms, {} new disruptions, {} queued",
                obs.new.len(),
                self.world.queue.len()
            );
        }
        self.timings.push(StepTiming {
            timestep: t,
            plan_ms,
            response_ms,
            disruption: !obs.new.is_empty(),
        });
        self.world.priorities = plan.priorities.clone();
        self.advance(&plan, &obs.active);
        self.committed = Some(plan);
    }

    /// Builds and gates the terraforming alternative. Returns the number
    /// of candidate pods, the gate record and whether it was adopted.
    fn terraform(
        &mut self,
        map: &GridMap,
        obs: &crate::disruption::Observation,
        affected: &BTreeSet<AgentId>,
        trapped: &[AgentId],
        plan: &mut Plan,
    ) -> (usize, Gate, bool) {
        let t = self.t;
        let plain_cost = plan.cost();
        let mut gate = Gate {
            plain_cost,
            terra_cost: None,
            adopted_cost: plain_cost,
            trapped: trapped.len(),
            tasks: Vec::new(),
        };
        let view = self.world.view(map, t, &obs.active);
        let mut candidates;
        if trapped.is_empty() {
            candidates = candidate_obstacles(map, &self.world.pods, &view, &obs.new, self.config.radius);
        } else {
            candidates = candidate_obstacles(map, &self.world.pods, &view, &obs.active, self.config.radius);
            let walls: BTreeSet<_> = trapped
                .iter()
                .filter_map(|&a| Some((a, self.world.current_goal(a)?)))
                .flat_map(|(a, g)| wall_pods(map, &view, a, self.world.agents[a.index()].position, g))
                .collect();
            candidates.retain(|p| walls.contains(p));
        }
        if affected.is_empty() || candidates.is_empty() {
            return (candidates.len(), gate, false);
        }
        // Trapped agents alone plan against the demi-agents when present.
        let planners: BTreeSet<AgentId> = if trapped.is_empty() {
            affected.clone()
        } else {
            trapped.iter().copied().collect()
        };
        let mut problem = PbsProblem::new(map, &view, self.config.window);
        problem.agents = planners.iter().map(|&a| self.world.plan_agent(a)).collect();
        problem.demis = candidates
            .iter()
            .map(|&o| (o, self.world.pods[o.index()].home))
            .collect();
        problem.fixed = plan
            .paths
            .iter()
            .filter(|p| p.owner.agent().is_some_and(|a| !planners.contains(&a)))
            .cloned()
            .collect();
        problem.initial = plan
            .priorities
            .iter()
            .filter(|(h, l)| planners.contains(h) && planners.contains(l))
            .map(|&(h, l)| (Owner::Agent(h), Owner::Agent(l)))
            .collect();
        problem.node_limit = self.config.node_limit;
        let targeted: Vec<Vertex> = self
            .world
            .tasks
            .iter()
            .filter(|tk| tk.kind == TaskKind::Terraforming && tk.state != TaskState::Done)
            .map(|tk| tk.delivery)
            .collect();
        let proposals = terraforming_tasks(&problem, |v| {
            view.pod_at(v).is_some() || view.is_disrupted(v) || targeted.contains(&v)
        });
        if proposals.is_empty() {
            return (candidates.len(), gate, false);
        }
        let mut alt = self.world.clone();
        let helpers = alt.assign_terraforming(map, &proposals);
        gate.tasks = proposals
            .iter()
            .map(|p| TerraTaskRecord {
                pod: p.pod,
                pickup: p.from,
                delivery: p.to,
                agent: alt.pods[p.pod.index()].assigned,
            })
            .collect();
        if helpers.is_empty() {
            return (candidates.len(), gate, false);
        }
        alt.assign_queued(map);
        let mut replan: BTreeSet<AgentId> = affected.clone();
        for a in &alt.agents {
            if a.task != self.world.agents[a.id.index()].task {
                replan.insert(a.id);
            }
        }
        let seeded: Vec<(AgentId, AgentId)> = helpers
            .iter()
            .flat_map(|&h| affected.iter().filter(move |&&a| a != h).map(move |&a| (h, a)))
            .collect();
        let alt_view = alt.view(map, t, &obs.active);
        let terra_plan = alt.replan_subset(map, &alt_view, plan, &replan, &seeded, &self.config);
        // Postponed work nobody else took is charged at the helper's
        // previous plan cost.
        let owed: u64 = helpers
            .iter()
            .filter_map(|h| self.world.agents[h.index()].task.map(|t| (h, t)))
            .filter(|(_, t)| alt.tasks[t.index()].state == TaskState::Queued)
            .map(|(h, _)| plan.paths[h.index()].cost as u64)
            .sum();
        let terra_cost = terra_plan.cost() + owed;
        let adopt = terra_cost < plain_cost || !trapped.is_empty();
        gate.terra_cost = Some(terra_cost);
        if adopt {
            gate.adopted_cost = terra_cost;
            self.world = alt;
            *plan = terra_plan;
        }
        (candidates.len(), gate, adopt)
    }

    /// Executes one step of `plan` and fires task events.
    fn advance(&mut self, plan: &Plan, disrupted: &[Vertex]) {
        let map = self.map.clone();
        let current = self.positions();
        let desired: Vec<Vertex> = plan.paths.iter().map(|p| p.at(1)).collect();
        let view = self.world.view(&map, self.t, disrupted);
        let (next, holds) = resolve_moves(&map, &current, &desired, |i, v| {
            if view.is_disrupted(v) {
                Some(HoldReason::Disrupted)
            } else if view.blocked_at(v, AgentId(i as u32)) {
                Some(HoldReason::Pod)
            } else {
                None
            }
        });
        for (i, reason) in holds {
            self.emit(EventKind::Hold {
                agent: AgentId(i as u32),
                target: desired[i],
                reason,
            });
        }
        let moves: Vec<Move> = (0..current.len())
            .filter(|&i| next[i] != current[i])
            .map(|i| Move {
                agent: AgentId(i as u32),
                from: current[i],
                to: next[i],
            })
            .collect();
        if !moves.is_empty() {
            self.emit(EventKind::Move {
                moves: moves.clone(),
            });
        }
        self.t += 1;
        for i in 0..current.len() {
            self.world.agents[i].position = next[i];
            if next[i] != current[i] {
                if let Some(pod) = self.world.agents[i].carrying {
                    let p = &mut self.world.pods[pod.index()];
                    if p.location == PodLocation::Parked(current[i]) {
                        p.location = PodLocation::Carried(AgentId(i as u32));
                    }
                }
            }
            self.task_transition(AgentId(i as u32));
        }
        self.receive_disruptions(&moves);
    }

    fn task_transition(&mut self, a: AgentId) {
        let Some(tid) = self.world.agents[a.index()].task else {
            return;
        };
        let pos = self.world.agents[a.index()].position;
        let t = self.t;
        let task = self.world.tasks[tid.index()].clone();
        match task.state {
            TaskState::Enroute if pos == task.pickup => {
                self.world.pods[task.pod.index()].location = PodLocation::Carried(a);
                self.world.agents[a.index()].carrying = Some(task.pod);
                let tk = &mut self.world.tasks[tid.index()];
                tk.state = TaskState::Delivering;
                tk.pickup_time = Some(t);
                self.emit(EventKind::Pickup {
                    agent: a,
                    task: tid,
                    pod: task.pod,
                });
            }
            TaskState::Delivering if pos == task.delivery => {
                if task.kind == TaskKind::Terraforming {
                    self.world.pods[task.pod.index()].location = PodLocation::Parked(pos);
                }
                self.world.tasks[tid.index()].state = TaskState::Restoring;
                self.emit(EventKind::Deliver {
                    agent: a,
                    task: tid,
                    task_kind: task.kind,
                });
            }
            TaskState::Restoring if pos == task.pickup => {
                let pod = &mut self.world.pods[task.pod.index()];
                pod.location = PodLocation::Home;
                pod.assigned = None;
                self.world.agents[a.index()].carrying = None;
                self.world.agents[a.index()].task = None;
                let tk = &mut self.world.tasks[tid.index()];
                tk.state = TaskState::Done;
                tk.dropoff_time = Some(t);
                self.emit(EventKind::Restore {
                    agent: a,
                    task: tid,
                    task_kind: task.kind,
                    pickup_time: task.pickup_time.unwrap_or(t),
                    ideal: task.ideal,
                });
            }
            _ => return,
        }
        self.world.wipe.insert(a);
        self.replan_due = true;
    }

    /// Pulls disruptions starting now from the source.
    fn receive_disruptions(&mut self, moves: &[Move]) {
        let t = self.t;
        let positions = self.positions();
        let view = self.world.view(&self.map, t, &[]);
        let arrivals = self
            .source
            .arrivals(t, moves, |v| positions.contains(&v) || view.pod_at(v).is_some());
        for d in arrivals.skipped {
            self.emit(EventKind::DisruptionSkipped {
                vertex: d.vertex,
                cause: d.cause,
            });
        }
        for d in arrivals.accepted {
            self.book.add(d);
            self.trace.push(d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disruption::{Cause, DisruptionConfig, DisruptionSampler};
    use crate::ids::PodId;

    fn open_sim(rows: &[&str], tasks: Vec<Task>, starts: &[Vertex], algo: Algorithm) -> Simulation {
        let map = Arc::new(GridMap::from_rows(rows).unwrap());
        Simulation::new(
            map,
            tasks,
            starts,
            algo,
            SimConfig {
                window: 8,
                ..Default::default()
            },
            DisruptionSource::disabled(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn idle_agents_wait() {
        let map = GridMap::from_rows(&["R....", ".....", "W...."]).unwrap();
        let s = open_sim(&["R....", ".....", "W...."], vec![], &[map.at(1, 1), map.at(1, 3)], Algorithm::Rhcr);
        let mut s = s;
        for _ in 0..5 {
            s.step();
        }
        assert_eq!(s.positions(), vec![map.at(1, 1), map.at(1, 3)]);
        let out = s.finish();
        assert_eq!(out.completed, 0);
    }

    #[test]
    fn single_task_hits_ideal_service_time() {
        let rows = ["R.....", "..@...", "......", ".....W"];
        let map = GridMap::from_rows(&rows).unwrap();
        let p = map.at(1, 2);
        let d = map.at(3, 5);
        let ideal = crate::metrics::ideal_service_time(&map, p, d).unwrap();
        let task = Task::new(TaskId(0), PodId(0), p, d, TaskKind::Standard, ideal);
        let out = open_sim(&rows, vec![task], &[map.at(0, 1)], Algorithm::Rhcr).run();
        assert_eq!(out.completed, 1);
        assert!(out.all_pods_home);
        let m = crate::metrics::compute_run_metrics(&out.events).unwrap();
        assert_eq!(m.tasks[0].ratio, 1.0);
    }

    #[test]
    fn executor_holds_contested_moves() {
        let map = GridMap::open(1, 4).unwrap();
        let cur = [map.at(0, 0), map.at(0, 2)];
        let (next, holds) = resolve_moves(&map, &cur, &[map.at(0, 1), map.at(0, 1)], |_, _| None);
        assert_eq!(next, vec![map.at(0, 1), map.at(0, 2)]);
        assert_eq!(holds.len(), 1);
        let (next, _) = resolve_moves(&map, &[map.at(0, 1), map.at(0, 2)], &[map.at(0, 2), map.at(0, 1)], |_, _| None);
        assert_eq!(next, vec![map.at(0, 1), map.at(0, 2)]);
        // Following an agent that is itself held is not allowed.
        let (next, _) = resolve_moves(
            &map,
            &[map.at(0, 0), map.at(0, 1)],
            &[map.at(0, 1), map.at(0, 2)],
            |_, v| (v == map.at(0, 2)).then_some(HoldReason::Disrupted),
        );
        assert_eq!(next, vec![map.at(0, 0), map.at(0, 1)]);
    }

    #[test]
    fn zero_rate_runs_match_across_algorithms() {
        let rows = ["R.R.R.R", ".......", ".@@.@@.", ".......", "W..W..W"];
        let map = Arc::new(GridMap::from_rows(&rows).unwrap());
        let tasks = crate::task::generate_tasks(&map, 8, 1);
        let starts = [map.at(1, 0), map.at(3, 6), map.at(1, 6)];
        let run = |algo| {
            let sampler = DisruptionSampler::new(DisruptionConfig::none(), 1);
            Simulation::new(
                map.clone(),
                tasks.clone(),
                &starts,
                algo,
                SimConfig { window: 10, ..Default::default() },
                DisruptionSource::Live(sampler),
                1,
            )
            .unwrap()
            .run()
        };
        let a = run(Algorithm::Rhcr);
        let b = run(Algorithm::Trhcr);
        assert_eq!(a.completed, 8);
        assert_eq!(a.events[1..], b.events[1..]);
    }

    #[test]
    fn disruption_on_path_is_avoided() {
        let rows = ["R......", ".......", "......W"];
        let map = Arc::new(GridMap::from_rows(&rows).unwrap());
        let trace = vec![Disruption {
            vertex: map.at(1, 3),
            start: 1,
            end: 50,
            cause: Cause::DroppedItem,
        }];
        let mut sim = Simulation::new(
            map.clone(),
            vec![],
            &[map.at(1, 0), map.at(1, 6)],
            Algorithm::Rhcr,
            SimConfig { window: 8, ..Default::default() },
            DisruptionSource::replay(trace),
            0,
        )
        .unwrap();
        for _ in 0..3 {
            sim.step();
        }
        assert!(sim
            .events()
            .iter()
            .any(|e| matches!(e.kind, EventKind::DisruptionStart { .. })));
    }
}
