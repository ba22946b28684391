use rustc_hash::FxHashMap;

use crate::grid::Vertex;
use crate::ids::Owner;
use crate::path::Path;

/// Cells and edges claimed by already-planned paths within the window, plus
/// pod cells those paths will empty by lifting their pod.
#[derive(Clone, Debug, Default)]
pub struct ReservationTable {
    horizon: u32,
    vertex: FxHashMap<(Vertex, u32), Owner>,
    edge: FxHashMap<(Vertex, Vertex, u32), Owner>,
    last_vertex_time: FxHashMap<Vertex, u32>,
    released: FxHashMap<Vertex, u32>,
}

impl ReservationTable {
    pub fn new(horizon: u32) -> Self {
        ReservationTable {
            horizon,
            ..Default::default()
        }
    }

    pub fn from_paths<'a>(horizon: u32, paths: impl IntoIterator<Item = &'a Path>) -> Self {
        let mut table = Self::new(horizon);
        for p in paths {
            table.add_path(p);
        }
        table
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.vertex.is_empty() && self.edge.is_empty()
    }

    /// Reserves the cells at `t < horizon` and the moves `t -> t+1` for
    /// `t < horizon`.
    pub fn add_path(&mut self, path: &Path) {
        for t in 0..self.horizon {
            let v = path.at(t as usize);
            self.vertex.insert((v, t), path.owner);
            let last = self.last_vertex_time.entry(v).or_insert(t);
            *last = (*last).max(t);
            let next = path.at(t as usize + 1);
            if next != v {
                self.edge.insert((v, next, t), path.owner);
            }
        }
        if let Some((cell, t)) = path.pickup {
            let free_from = t + 1;
            let e = self.released.entry(cell).or_insert(free_from);
            *e = (*e).min(free_from);
        }
    }

    #[inline]
    pub fn vertex_reserved(&self, v: Vertex, t: u32) -> bool {
        t < self.horizon && self.vertex.contains_key(&(v, t))
    }

    pub fn vertex_owner(&self, v: Vertex, t: u32) -> Option<Owner> {
        self.vertex.get(&(v, t)).copied()
    }

    /// Whether moving `from -> to` between `t` and `t+1` swaps with a
    /// reserved move `to -> from`.
    #[inline]
    pub fn edge_blocked(&self, from: Vertex, to: Vertex, t: u32) -> bool {
        t < self.horizon && self.edge.contains_key(&(to, from, t))
    }

    /// No reservation on `v` at any time in `[t, horizon)`.
    #[inline]
    pub fn free_from(&self, v: Vertex, t: u32) -> bool {
        match self.last_vertex_time.get(&v) {
            Some(&last) => last < t,
            None => true,
        }
    }

    /// Time from which a currently resting pod's cell is empty, if a
    /// reserved path lifts that pod.
    #[inline]
    pub fn released_at(&self, v: Vertex) -> Option<u32> {
        self.released.get(&v).copied()
    }
}
