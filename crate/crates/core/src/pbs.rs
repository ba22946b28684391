//! Windowed priority-based search over agents and, optionally, demi-agents.

use rustc_hash::FxHashMap;

use crate::conflict::{detect_collisions, Conflict};
use crate::grid::{GridMap, Vertex};
use crate::ids::{Owner, PodId};
use crate::occupancy::OccupancyView;
use crate::path::{terra_flowtime, Path};
use crate::planner::{manhattan_estimate, plan_agent_path, plan_demi_path, PlanAgent, PlanContext};
use crate::priority::PrioritySet;
use crate::reservation::ReservationTable;

pub const DEFAULT_NODE_LIMIT: usize = 2_000;

/// One PBS call: the owners to plan, the paths that stay as they are, and
/// the ordering carried over from earlier calls.
#[derive(Clone, Debug)]
pub struct PbsProblem<'a> {
    pub map: &'a GridMap,
    pub view: &'a OccupancyView,
    pub window: u32,
    pub agents: Vec<PlanAgent>,
    /// Movable pods planned as demi-agents, with their current cells.
    pub demis: Vec<(PodId, Vertex)>,
    /// Paths that are not replanned; they outrank every planned owner.
    pub fixed: Vec<Path>,
    /// Priority pairs `(higher, lower)` to seed the root with. Pairs that
    /// mention unknown owners or would close a cycle are skipped.
    pub initial: Vec<(Owner, Owner)>,
    pub node_limit: usize,
}

impl<'a> PbsProblem<'a> {
    pub fn new(map: &'a GridMap, view: &'a OccupancyView, window: u32) -> Self {
        PbsProblem {
            map,
            view,
            window,
            agents: Vec::new(),
            demis: Vec::new(),
            fixed: Vec::new(),
            initial: Vec::new(),
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }

    pub fn owners(&self) -> Vec<Owner> {
        self.agents
            .iter()
            .map(|a| Owner::Agent(a.agent))
            .chain(self.demis.iter().map(|&(p, _)| Owner::Demi(p)))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct PbsSolution {
    /// Agents first, then demi-agents, in problem order.
    pub paths: Vec<Path>,
    /// Priority pairs `(higher, lower)` of the returned node, insertion order.
    pub priorities: Vec<(Owner, Owner)>,
    /// Terra-flowtime of `paths` (plain flowtime when there are no demis).
    pub cost: u64,
    pub expanded: usize,
    /// False when the node limit was hit or the tree was exhausted; the
    /// paths then come from the fallback.
    pub complete: bool,
}

#[derive(Clone)]
struct PtNode {
    priorities: PrioritySet,
    paths: Vec<Path>,
    conflicts: Vec<Conflict>,
    cost: u64,
}

struct Solver<'p, 'a> {
    problem: &'p PbsProblem<'a>,
    ctx: PlanContext<'a>,
    base: ReservationTable,
    index: FxHashMap<Owner, usize>,
}

impl<'p, 'a> Solver<'p, 'a> {
    fn new(problem: &'p PbsProblem<'a>, view: &'a OccupancyView) -> Self {
        let starts = problem.agents.iter().map(|a| a.start);
        let ctx = PlanContext::new(problem.map, view, problem.window, starts);
        let base = ReservationTable::from_paths(problem.window, &problem.fixed);
        let index = problem
            .owners()
            .into_iter()
            .enumerate()
            .map(|(i, o)| (o, i))
            .collect();
        Solver {
            problem,
            ctx,
            base,
            index,
        }
    }

    fn num_owners(&self) -> usize {
        self.problem.agents.len() + self.problem.demis.len()
    }

    /// Plans owner `i` against its ancestors. The flag is false when no
    /// path avoiding those reservations exists.
    fn plan_one(&mut self, i: usize, priorities: &PrioritySet, paths: &[Path]) -> (Path, bool) {
        let mut res = self.base.clone();
        for j in priorities.ancestors(i) {
            res.add_path(&paths[j]);
        }
        let na = self.problem.agents.len();
        let path = if i < na {
            plan_agent_path(&mut self.ctx, &self.problem.agents[i], &res)
                .expect("agent inputs validated before search")
        } else {
            let (pod, at) = self.problem.demis[i - na];
            plan_demi_path(&self.ctx, pod, at, &res)
        };
        let ok = !path.stuck || respects(&path, &res, self.problem.window);
        (path, ok)
    }

    /// Replans `ids` in topological order, each against the reservations
    /// of all of its ancestors. Returns false if some owner had no path.
    fn replan(&mut self, ids: Vec<usize>, priorities: &PrioritySet, paths: &mut [Path]) -> bool {
        let mut all_ok = true;
        for i in priorities.topological(ids) {
            let (p, ok) = self.plan_one(i, priorities, paths);
            paths[i] = p;
            all_ok &= ok;
        }
        all_ok
    }

    fn make_node(&self, priorities: PrioritySet, paths: Vec<Path>) -> PtNode {
        let conflicts = detect_collisions(&paths, self.problem.window);
        let cost = terra_flowtime(&paths);
        PtNode {
            priorities,
            paths,
            conflicts,
            cost,
        }
    }

    fn root(&mut self) -> PtNode {
        let n = self.num_owners();
        let mut priorities = PrioritySet::new(n);
        for (hi, lo) in &self.problem.initial {
            if let (Some(&h), Some(&l)) = (self.index.get(hi), self.index.get(lo)) {
                priorities.add(h, l);
            }
        }
        let mut paths: Vec<Path> = self
            .problem
            .agents
            .iter()
            .map(|a| Path::waiting(Owner::Agent(a.agent), 0, a.start, 1))
            .chain(
                self.problem
                    .demis
                    .iter()
                    .map(|&(p, v)| Path::waiting(Owner::Demi(p), 0, v, 1)),
            )
            .collect();
        let _ = self.replan((0..n).collect(), &priorities, &mut paths);
        self.make_node(priorities, paths)
    }

    fn child(&mut self, parent: &PtNode, hi: usize, lo: usize) -> Option<PtNode> {
        let mut priorities = parent.priorities.clone();
        if !priorities.add(hi, lo) {
            return None;
        }
        let mut paths = parent.paths.clone();
        let ids = priorities.with_descendants(lo);
        if !self.replan(ids, &priorities, &mut paths) {
            return None;
        }
        Some(self.make_node(priorities, paths))
    }

    fn solve(mut self) -> PbsSolution {
        let owners = self.problem.owners();
        let root = self.root();
        let mut best = root.clone();
        let mut stack = vec![root];
        let mut expanded = 0usize;
        while let Some(node) = stack.pop() {
            if node.conflicts.is_empty() {
                return self.finish(node, expanded, true, &owners);
            }
            if (node.conflicts.len(), node.cost) < (best.conflicts.len(), best.cost) {
                best = node.clone();
            }
            if expanded >= self.problem.node_limit {
                break;
            }
            expanded += 1;
            let c = node.conflicts[0];
            let a = self.index[&c.first];
            let b = self.index[&c.second];
            let mut children = Vec::with_capacity(2);
            for (hi, lo) in [(a, b), (b, a)] {
                if let Some(child) = self.child(&node, hi, lo) {
                    let key = (
                        child.cost,
                        std::cmp::Reverse(node.paths[hi].terra_cost()),
                        owners[hi],
                    );
                    children.push((key, child));
                }
            }
            children.sort_by(|x, y| x.0.cmp(&y.0));
            for (_, child) in children.into_iter().rev() {
                stack.push(child);
            }
        }
        log::debug!(
            "pbs fallback after {expanded} expansions, {} conflicts left",
            best.conflicts.len()
        );
        let fallback = self.fallback(best);
        self.finish(fallback, expanded, false, &owners)
    }

    /// Freezes owners involved in conflicts until none remain among the
    /// planned paths.
    fn fallback(&self, mut node: PtNode) -> PtNode {
        let w = self.problem.window;
        let na = self.problem.agents.len();
        let mut frozen = vec![false; node.paths.len()];
        loop {
            let conflicts = detect_collisions(&node.paths, w);
            if conflicts.is_empty() {
                break;
            }
            let mut changed = false;
            for c in conflicts {
                for o in [c.first, c.second] {
                    let i = self.index[&o];
                    if !frozen[i] {
                        frozen[i] = true;
                        changed = true;
                        let start = node.paths[i].start();
                        let mut p =
                            Path::waiting(o, self.ctx.view().timestep, start, w as usize + 1);
                        if i < na {
                            let a = &self.problem.agents[i];
                            p.cost = w + manhattan_estimate(self.problem.map, a.start, &a.goals);
                        }
                        node.paths[i] = p;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let priorities = node.priorities;
        self.make_node(priorities, node.paths)
    }

    fn finish(&self, node: PtNode, expanded: usize, complete: bool, owners: &[Owner]) -> PbsSolution {
        PbsSolution {
            priorities: node
                .priorities
                .edges()
                .iter()
                .map(|&(h, l)| (owners[h], owners[l]))
                .collect(),
            cost: node.cost,
            paths: node.paths,
            expanded,
            complete,
        }
    }
}

fn respects(path: &Path, res: &ReservationTable, window: u32) -> bool {
    (0..=window as usize).all(|t| {
        let v = path.at(t);
        !res.vertex_reserved(v, t as u32) && (t == 0 || !res.edge_blocked(path.at(t - 1), v, t as u32 - 1))
    })
}

/// Windowed PBS over the problem's agents. Demi-agents, if any, are
/// ignored: their pods stay where the view puts them.
pub fn wpbs(problem: &PbsProblem<'_>) -> PbsSolution {
    if problem.demis.is_empty() {
        return Solver::new(problem, problem.view).solve();
    }
    let mut p = problem.clone();
    p.demis.clear();
    Solver::new(&p, problem.view).solve()
}

/// Windowed PBS in which the listed pods move on their own and are charged
/// only for their moves. With no demi-agents this is exactly [`wpbs`].
pub fn twpbs(problem: &PbsProblem<'_>) -> PbsSolution {
    if problem.demis.is_empty() {
        return wpbs(problem);
    }
    let pods: Vec<PodId> = problem.demis.iter().map(|&(p, _)| p).collect();
    let view = problem.view.without_pods(&pods);
    Solver::new(problem, &view).solve()
}

/// Plans every owner in topological order of `priorities`, each against its
/// ancestors. Owners without any priority pair see only the fixed paths.
pub fn find_paths(problem: &PbsProblem<'_>, priorities: &PrioritySet) -> Vec<Path> {
    let pods: Vec<PodId> = problem.demis.iter().map(|&(p, _)| p).collect();
    let view = problem.view.without_pods(&pods);
    let mut solver = Solver::new(problem, &view);
    let n = solver.num_owners();
    let mut paths = vec![Path::waiting(Owner::Demi(PodId(u32::MAX)), 0, Vertex(0), 1); n];
    solver.replan((0..n).collect(), priorities, &mut paths);
    paths
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::AgentId;
    use crate::occupancy::pods_for;
    use proptest::prelude::*;

    fn agent(id: u32, start: Vertex, goal: Vertex) -> PlanAgent {
        PlanAgent {
            agent: AgentId(id),
            start,
            goals: vec![goal],
            pickup: None,
        }
    }

    #[test]
    fn single_agent_root_is_a_solution() {
        let map = GridMap::open(4, 4).unwrap();
        let view = OccupancyView::empty(&map);
        let mut p = PbsProblem::new(&map, &view, 6);
        p.agents.push(agent(0, map.at(0, 0), map.at(3, 3)));
        let s = wpbs(&p);
        assert!(s.complete);
        assert_eq!(s.expanded, 0);
        assert_eq!(s.cost, 6);
    }

    #[test]
    fn head_on_corridor_with_niche() {
        // One niche above the middle of a corridor.
        let map = GridMap::from_rows(&["@@@@.@@", "......."]).unwrap();
        let view = OccupancyView::new(&map, 0, &pods_for(&map), []);
        let mut p = PbsProblem::new(&map, &view, 12);
        p.agents.push(agent(0, map.at(1, 0), map.at(1, 6)));
        p.agents.push(agent(1, map.at(1, 6), map.at(1, 0)));
        let s = wpbs(&p);
        assert!(s.complete);
        assert!(detect_collisions(&s.paths, 12).is_empty());
        // One agent ducks into the niche and loses three steps.
        assert_eq!(s.cost, 6 + 9);
    }

    #[test]
    fn solid_row_is_routed_around() {
        let map = GridMap::from_rows(&[".......", ".@@@@@.", "......."]).unwrap();
        let view = OccupancyView::new(&map, 0, &pods_for(&map), []);
        let mut p = PbsProblem::new(&map, &view, 12);
        p.agents.push(agent(0, map.at(0, 3), map.at(2, 3)));
        p.agents.push(agent(1, map.at(2, 2), map.at(0, 2)));
        p.agents.push(agent(2, map.at(0, 0), map.at(0, 6)));
        let s = wpbs(&p);
        assert!(s.complete);
        let blocked: Vec<Vertex> = (1..6).map(|c| map.at(1, c)).collect();
        for path in &s.paths {
            assert!(!path.visits_any(&blocked, 13));
        }
    }

    #[test]
    fn movable_row_opens_a_passage() {
        let map = GridMap::from_rows(&[".......", ".@@@@@.", "......."]).unwrap();
        let view = OccupancyView::new(&map, 0, &pods_for(&map), []);
        let mut p = PbsProblem::new(&map, &view, 12);
        p.agents.push(agent(0, map.at(0, 3), map.at(2, 3)));
        let frozen = wpbs(&p);
        p.demis = pods_for(&map).iter().map(|o| (o.id, o.home)).collect();
        let terra = twpbs(&p);
        assert!(terra.complete);
        assert!(detect_collisions(&terra.paths, 12).is_empty());
        assert!(terra.cost < frozen.cost, "{} vs {}", terra.cost, frozen.cost);
        assert!(terra.paths[1..].iter().any(|d| d.moves() >= 1));
    }

    #[test]
    fn untouched_demis_cost_nothing() {
        let map = GridMap::from_rows(&["......", "......", "....@@"]).unwrap();
        let view = OccupancyView::new(&map, 0, &pods_for(&map), []);
        let mut p = PbsProblem::new(&map, &view, 8);
        p.agents.push(agent(0, map.at(0, 0), map.at(0, 5)));
        let plain = wpbs(&p);
        p.demis = pods_for(&map).iter().map(|o| (o.id, o.home)).collect();
        let terra = twpbs(&p);
        assert_eq!(terra.cost, plain.cost);
        assert!(terra.paths[1..].iter().all(|d| d.moves() == 0));
    }

    #[test]
    fn child_sets_extend_parent_and_respect_reservations() {
        let map = GridMap::open(3, 6).unwrap();
        let view = OccupancyView::empty(&map);
        let mut p = PbsProblem::new(&map, &view, 10);
        p.agents.push(agent(0, map.at(1, 0), map.at(1, 5)));
        p.agents.push(agent(1, map.at(1, 5), map.at(1, 0)));
        let mut pr = PrioritySet::new(2);
        pr.add(0, 1);
        let paths = find_paths(&p, &pr);
        let res = ReservationTable::from_paths(10, [&paths[0]]);
        for t in 0..10u32 {
            assert!(paths[1].at(t as usize) != paths[0].at(t as usize));
            assert!(!res.edge_blocked(paths[1].at(t as usize), paths[1].at(t as usize + 1), t));
        }
    }

    fn random_problem(
        seed: u64,
        map: &GridMap,
    ) -> (Vec<PlanAgent>, Vec<(usize, usize)>) {
        use rand::{seq::SliceRandom, Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut cells: Vec<Vertex> = map.vertices().collect();
        cells.shuffle(&mut rng);
        let n = rng.random_range(2..=5);
        let agents = (0..n)
            .map(|i| agent(i as u32, cells[i], cells[n + i]))
            .collect();
        let pairs = (0..rng.random_range(0..6))
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .collect();
        (agents, pairs)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn incremental_replanning_matches_full(seed in 0u64..10_000) {
            let map = GridMap::open(5, 5).unwrap();
            let view = OccupancyView::empty(&map);
            let (agents, pairs) = random_problem(seed, &map);
            let mut p = PbsProblem::new(&map, &view, 8);
            p.agents = agents;
            let mut solver = Solver::new(&p, &view);
            let mut node = solver.root();
            for (hi, lo) in pairs {
                if let Some(child) = solver.child(&node, hi, lo) {
                    node = child;
                    let full = find_paths(&p, &node.priorities);
                    prop_assert_eq!(&full, &node.paths);
                }
            }
        }

        #[test]
        fn complete_solutions_are_collision_free(seed in 0u64..10_000) {
            let map = GridMap::open(5, 5).unwrap();
            let view = OccupancyView::empty(&map);
            let (agents, _) = random_problem(seed, &map);
            let mut p = PbsProblem::new(&map, &view, 8);
            p.agents = agents;
            let s = wpbs(&p);
            if s.complete {
                prop_assert!(detect_collisions(&s.paths, 8).is_empty());
            }
            prop_assert_eq!(s.cost, terra_flowtime(&s.paths));
        }
    }
}
