//! Brute-force reference searches over small grids.
//!
//! Written against plain cell indices (`row * width + col`) so they share no
//! code with the crate. Window semantics: a vertex is contested at times
//! `t < window`, a move `t -> t + 1` for every `t < window`, and an agent's
//! cost is the time from which it rests on its last goal for good, or
//! `window` plus the remaining relaxed distance when it is still travelling
//! at the window's end.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet, VecDeque};

use rand::seq::IndexedRandom;
use rand::Rng;

const INF: u32 = u32::MAX;

fn neighbours(h: u32, w: u32, v: u32) -> Vec<u32> {
    let (r, c) = (v / w, v % w);
    let mut out = Vec::with_capacity(4);
    if r > 0 {
        out.push(v - w);
    }
    if r + 1 < h {
        out.push(v + w);
    }
    if c > 0 {
        out.push(v - 1);
    }
    if c + 1 < w {
        out.push(v + 1);
    }
    out
}

fn bfs(h: u32, w: u32, source: u32, open: &dyn Fn(u32) -> bool) -> Vec<u32> {
    let mut d = vec![INF; (h * w) as usize];
    if !open(source) {
        return d;
    }
    d[source as usize] = 0;
    let mut q = VecDeque::from([source]);
    while let Some(v) = q.pop_front() {
        for u in neighbours(h, w, v) {
            if open(u) && d[u as usize] == INF {
                d[u as usize] = d[v as usize] + 1;
                q.push_back(u);
            }
        }
    }
    d
}

fn advance(goals: &[u32], mut k: usize, v: u32) -> usize {
    while k < goals.len() && goals[k] == v {
        k += 1;
    }
    k
}

/// Relaxed remaining distance through the goal sequence from goal index `k`.
struct GoalDistance {
    tables: Vec<Vec<u32>>,
    goals: Vec<u32>,
}

impl GoalDistance {
    fn new(h: u32, w: u32, goals: &[u32], open: &dyn Fn(u32) -> bool) -> Self {
        GoalDistance {
            tables: goals.iter().map(|&g| bfs(h, w, g, open)).collect(),
            goals: goals.to_vec(),
        }
    }

    fn h(&self, v: u32, k: usize) -> u32 {
        let n = self.goals.len();
        if k >= n {
            return self.tables[n - 1][v as usize];
        }
        let mut total = self.tables[k][v as usize];
        for j in k + 1..n {
            let leg = self.tables[j][self.goals[j - 1] as usize];
            if total == INF || leg == INF {
                return INF;
            }
            total += leg;
        }
        total
    }
}

fn random_free(rng: &mut impl Rng, free: &[u32], taken: &HashSet<u32>) -> Option<u32> {
    let pool: Vec<u32> = free.iter().copied().filter(|v| !taken.contains(v)).collect();
    pool.choose(rng).copied()
}

/// One agent against fixed higher-priority paths.
pub struct SingleInstance {
    pub height: u32,
    pub width: u32,
    pub window: u32,
    pub blocked: BTreeSet<u32>,
    pub pods: Vec<u32>,
    pub start: u32,
    pub goals: Vec<u32>,
    pub pickup: Option<u32>,
    pub reserved: Vec<Vec<u32>>,
}

impl SingleInstance {
    pub fn random(rng: &mut impl Rng) -> Self {
        loop {
            let (height, width) = (rng.random_range(2..=8), rng.random_range(2..=8));
            let n = height * width;
            let blocked: BTreeSet<u32> = (0..n).filter(|_| rng.random_bool(0.2)).collect();
            let free: Vec<u32> = (0..n).filter(|v| !blocked.contains(v)).collect();
            if free.len() < 3 {
                continue;
            }
            let mut taken = HashSet::new();
            let start = free[rng.random_range(0..free.len())];
            taken.insert(start);
            let mut pods = Vec::new();
            for _ in 0..rng.random_range(0..=2) {
                if let Some(p) = random_free(rng, &free, &taken) {
                    taken.insert(p);
                    pods.push(p);
                }
            }
            let mut goals = Vec::new();
            let mut pickup = None;
            if !pods.is_empty() && rng.random_bool(0.3) {
                pickup = Some(pods[0]);
                goals.push(pods[0]);
            }
            for _ in 0..rng.random_range(1..=2) {
                let pool: Vec<u32> = free.iter().copied().filter(|v| !pods.contains(v)).collect();
                goals.push(*pool.choose(rng).unwrap());
            }
            let window = rng.random_range(1..=12);
            let walkable: Vec<u32> = free.iter().copied().filter(|v| !pods.contains(v)).collect();
            let reserved = (0..rng.random_range(0..=3))
                .map(|_| {
                    let mut v = *walkable.choose(rng).unwrap();
                    let mut p = vec![v];
                    for _ in 0..window {
                        let mut opts = vec![v];
                        opts.extend(neighbours(height, width, v).into_iter().filter(|u| walkable.contains(u)));
                        v = *opts.choose(rng).unwrap();
                        p.push(v);
                    }
                    p
                })
                .collect();
            return SingleInstance {
                height,
                width,
                window,
                blocked,
                pods,
                start,
                goals,
                pickup,
                reserved,
            };
        }
    }

    fn passable(&self, v: u32) -> bool {
        !self.blocked.contains(&v) && (!self.pods.contains(&v) || v == self.start || Some(v) == self.pickup)
    }

    fn vertex_taken(&self, v: u32, t: u32) -> bool {
        t < self.window && self.reserved.iter().any(|p| p[t as usize] == v)
    }

    fn swap_taken(&self, from: u32, to: u32, t: u32) -> bool {
        t < self.window
            && self
                .reserved
                .iter()
                .any(|p| p[t as usize] == to && p[t as usize + 1] == from && to != from)
    }

    fn free_from(&self, v: u32, t: u32) -> bool {
        (t..self.window).all(|s| !self.vertex_taken(v, s))
    }

    fn distances(&self) -> GoalDistance {
        GoalDistance::new(self.height, self.width, &self.goals, &|v| self.passable(v))
    }

    /// Minimum cost over every legal space-time path, or `None` when the
    /// goal sequence is out of reach or every path dies inside the window.
    pub fn exhaustive_cost(&self) -> Option<u32> {
        let dist = self.distances();
        let n = self.goals.len();
        let last = self.goals[n - 1];
        let k0 = advance(&self.goals, 0, self.start);
        if dist.h(self.start, k0) == INF {
            return None;
        }
        let mut layer: BTreeSet<(u32, usize)> = BTreeSet::from([(self.start, k0)]);
        for t in 0..=self.window {
            if layer.iter().any(|&(v, k)| k == n && v == last && self.free_from(v, t)) {
                return Some(t);
            }
            if t == self.window {
                return layer.iter().map(|&(v, k)| self.window + dist.h(v, k)).min();
            }
            let mut next = BTreeSet::new();
            for &(v, k) in &layer {
                let mut opts = vec![v];
                opts.extend(neighbours(self.height, self.width, v));
                for u in opts {
                    if !self.passable(u) || self.vertex_taken(u, t + 1) || self.swap_taken(v, u, t) {
                        continue;
                    }
                    let nk = advance(&self.goals, k, u);
                    if dist.h(u, nk) != INF {
                        next.insert((u, nk));
                    }
                }
            }
            if next.is_empty() {
                return None;
            }
            layer = next;
        }
        unreachable!()
    }

    pub fn path_is_legal(&self, p: &[u32]) -> bool {
        if p.len() != self.window as usize + 1 || p[0] != self.start {
            return false;
        }
        (0..self.window).all(|t| {
            let (v, u) = (p[t as usize], p[t as usize + 1]);
            (u == v || neighbours(self.height, self.width, v).contains(&u))
                && self.passable(u)
                && !self.vertex_taken(u, t + 1)
                && !self.swap_taken(v, u, t)
        })
    }

    /// Cost of a given path under the window cost model.
    pub fn evaluate(&self, p: &[u32]) -> Option<u32> {
        let dist = self.distances();
        let n = self.goals.len();
        let last = self.goals[n - 1];
        let mut ks = vec![advance(&self.goals, 0, p[0])];
        for &v in &p[1..] {
            ks.push(advance(&self.goals, *ks.last().unwrap(), v));
        }
        let w = self.window as usize;
        let settled = (0..=w)
            .find(|&t| ks[t] == n && p[t..].iter().all(|&v| v == last) && self.free_from(last, t as u32));
        match settled {
            Some(t) => Some(t as u32),
            None => {
                let h = dist.h(p[w], ks[w]);
                (h != INF).then(|| self.window + h)
            }
        }
    }
}

pub struct JointAgent {
    pub start: u32,
    pub goals: Vec<u32>,
}

/// Agents and self-propelled pods sharing a small grid.
pub struct JointInstance {
    pub height: u32,
    pub width: u32,
    pub window: u32,
    pub blocked: BTreeSet<u32>,
    pub agents: Vec<JointAgent>,
    pub demis: Vec<u32>,
}

impl JointInstance {
    pub fn random(rng: &mut impl Rng) -> Self {
        loop {
            let (height, width) = (rng.random_range(2..=6), rng.random_range(2..=6));
            let n = height * width;
            let blocked: BTreeSet<u32> = (0..n).filter(|_| rng.random_bool(0.15)).collect();
            let free: Vec<u32> = (0..n).filter(|v| !blocked.contains(v)).collect();
            let na = rng.random_range(1..=2);
            let nd = rng.random_range(1..=2);
            if free.len() < na + nd + 1 {
                continue;
            }
            let mut taken = HashSet::new();
            let mut agents = Vec::new();
            for _ in 0..na {
                let start = random_free(rng, &free, &taken).unwrap();
                taken.insert(start);
                let goals = (0..rng.random_range(1..=2)).map(|_| *free.choose(rng).unwrap()).collect();
                agents.push(JointAgent { start, goals });
            }
            let demis: Vec<u32> = (0..nd)
                .map(|_| {
                    let d = random_free(rng, &free, &taken).unwrap();
                    taken.insert(d);
                    d
                })
                .collect();
            let area = (height * width) as f64;
            let window = if area > 20.0 { rng.random_range(3..=5) } else { rng.random_range(3..=7) };
            return JointInstance {
                height,
                width,
                window,
                blocked,
                agents,
                demis,
            };
        }
    }

    fn open(&self, v: u32) -> bool {
        !self.blocked.contains(&v)
    }

    /// Every goal sequence is reachable, both with the pods gone and with
    /// the pods left where they are.
    pub fn well_posed(&self) -> bool {
        self.agents.iter().all(|a| {
            let moved = GoalDistance::new(self.height, self.width, &a.goals, &|v| self.open(v));
            let frozen = GoalDistance::new(self.height, self.width, &a.goals, &|v| {
                self.open(v) && (v == a.start || !self.demis.contains(&v))
            });
            let k0 = advance(&a.goals, 0, a.start);
            moved.h(a.start, k0) != INF && frozen.h(a.start, k0) != INF
        })
    }

    /// Optimal terra-flowtime over all collision-free joint plans: agents
    /// pay one per step until they settle on their last goal, pods pay one
    /// per move.
    pub fn optimum(&self) -> u64 {
        let na = self.agents.len();
        let owners = na + self.demis.len();
        let dist: Vec<GoalDistance> = self
            .agents
            .iter()
            .map(|a| GoalDistance::new(self.height, self.width, &a.goals, &|v| self.open(v)))
            .collect();

        // key: t, positions, goal indices, settled flags
        type Key = (u32, Vec<u32>, Vec<usize>, Vec<bool>);
        let heuristic = |key: &Key| -> u64 {
            (0..na)
                .filter(|&i| !key.3[i])
                .map(|i| dist[i].h(key.1[i], key.2[i]) as u64)
                .sum()
        };
        let start: Key = (
            0,
            self.agents
                .iter()
                .map(|a| a.start)
                .chain(self.demis.iter().copied())
                .collect(),
            self.agents.iter().map(|a| advance(&a.goals, 0, a.start)).collect(),
            vec![false; na],
        );
        let mut best: HashMap<Key, u64> = HashMap::new();
        let mut open: BinaryHeap<Reverse<(u64, u64, Key)>> = BinaryHeap::new();
        best.insert(start.clone(), 0);
        open.push(Reverse((heuristic(&start), 0, start)));
        while let Some(Reverse((f, g, key))) = open.pop() {
            if best.get(&key).is_some_and(|&b| b < g) {
                continue;
            }
            let (t, pos, ks, settled) = &key;
            if *t == self.window {
                return f;
            }
            let mut push = |k: Key, cost: u64| {
                if best.get(&k).is_none_or(|&b| cost < b) {
                    best.insert(k.clone(), cost);
                    open.push(Reverse((cost + heuristic(&k), cost, k)));
                }
            };
            for i in 0..na {
                let last = *self.agents[i].goals.last().unwrap();
                if !settled[i] && ks[i] == self.agents[i].goals.len() && pos[i] == last {
                    let mut s = settled.clone();
                    s[i] = true;
                    push((*t, pos.clone(), ks.clone(), s), g);
                }
            }
            let options: Vec<Vec<u32>> = (0..owners)
                .map(|i| {
                    if i < na && settled[i] {
                        return vec![pos[i]];
                    }
                    let mut o = vec![pos[i]];
                    o.extend(neighbours(self.height, self.width, pos[i]).into_iter().filter(|&u| self.open(u)));
                    o
                })
                .collect();
            let mut choice = vec![0usize; owners];
            'product: loop {
                let next: Vec<u32> = (0..owners).map(|i| options[i][choice[i]]).collect();
                let mut legal = true;
                for i in 0..owners {
                    for j in i + 1..owners {
                        if t + 1 < self.window && next[i] == next[j] {
                            legal = false;
                        }
                        if next[i] == pos[j] && next[j] == pos[i] && pos[i] != pos[j] {
                            legal = false;
                        }
                    }
                }
                if legal {
                    let mut cost = g;
                    let mut nks = ks.clone();
                    for i in 0..owners {
                        if i < na {
                            if !settled[i] {
                                cost += 1;
                            }
                            nks[i] = advance(&self.agents[i].goals, ks[i], next[i]);
                        } else if next[i] != pos[i] {
                            cost += 1;
                        }
                    }
                    let finite = (0..na).all(|i| settled[i] || dist[i].h(next[i], nks[i]) != INF);
                    if finite {
                        push((t + 1, next, nks, settled.clone()), cost);
                    }
                }
                for i in 0..owners {
                    choice[i] += 1;
                    if choice[i] < options[i].len() {
                        continue 'product;
                    }
                    choice[i] = 0;
                }
                break;
            }
        }
        panic!("joint search found no plan; waiting in place is always collision-free")
    }
}
