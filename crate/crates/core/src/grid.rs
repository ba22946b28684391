//! Static warehouse topology: a 4-connected rectangular grid whose cells are
//! all vertices, refined into floor, pod-home, workstation and reserved classes.

use std::collections::VecDeque;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::MapError;

/// A grid vertex, stored as the row-major cell index.
///
/// Ordering by index is the same as ordering by `(row, col)`, which is the
/// tiebreak used everywhere a deterministic choice among vertices is needed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vertex(pub u32);

impl Vertex {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// `(row, col)` pair, mostly used at I/O boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellClass {
    Floor,
    PodHome,
    Workstation,
    Reserved,
}

impl CellClass {
    pub fn symbol(self) -> char {
        match self {
            CellClass::Floor => '.',
            CellClass::PodHome => '@',
            CellClass::Workstation => 'W',
            CellClass::Reserved => 'R',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '.' => Some(CellClass::Floor),
            '@' => Some(CellClass::PodHome),
            'W' => Some(CellClass::Workstation),
            'R' => Some(CellClass::Reserved),
            _ => None,
        }
    }
}

/// Distance value returned when two vertices are not connected.
pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridMap {
    height: u32,
    width: u32,
    cells: Vec<CellClass>,
}

impl GridMap {
    /// Builds a map and checks the connectivity invariant.
    pub fn new(height: u32, width: u32, cells: Vec<CellClass>) -> Result<Self, MapError> {
        if height == 0 || width == 0 {
            return Err(MapError::Dimensions(format!(
                "map must be non-empty, got {height}x{width}"
            )));
        }
        if cells.len() != (height as usize) * (width as usize) {
            return Err(MapError::Dimensions(format!(
                "expected {} cells for a {height}x{width} map, got {}",
                height as usize * width as usize,
                cells.len()
            )));
        }
        let map = GridMap {
            height,
            width,
            cells,
        };
        map.check_connected()?;
        Ok(map)
    }

    /// An all-floor map of the given size.
    pub fn open(height: u32, width: u32) -> Result<Self, MapError> {
        Self::new(
            height,
            width,
            vec![CellClass::Floor; height as usize * width as usize],
        )
    }

    /// Parses rows of class symbols without a header.
    pub fn from_rows(rows: &[&str]) -> Result<Self, MapError> {
        let height = rows.len() as u32;
        let width = rows.first().map(|r| r.chars().count()).unwrap_or(0) as u32;
        let mut cells = Vec::with_capacity((height * width) as usize);
        for (r, line) in rows.iter().enumerate() {
            if line.chars().count() as u32 != width {
                return Err(MapError::Parse {
                    line: r + 1,
                    message: format!("row has {} cells, expected {width}", line.chars().count()),
                });
            }
            for c in line.chars() {
                cells.push(CellClass::from_symbol(c).ok_or_else(|| MapError::Parse {
                    line: r + 1,
                    message: format!("unknown cell symbol {c:?}"),
                })?);
            }
        }
        Self::new(height, width, cells)
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.cells.len() as u32).map(Vertex)
    }

    #[inline]
    pub fn contains(&self, v: Vertex) -> bool {
        v.index() < self.cells.len()
    }

    #[inline]
    pub fn class(&self, v: Vertex) -> CellClass {
        self.cells[v.index()]
    }

    pub fn vertex(&self, row: u32, col: u32) -> Option<Vertex> {
        (row < self.height && col < self.width).then(|| Vertex(row * self.width + col))
    }

    /// Like [`GridMap::vertex`] but panics on out-of-range coordinates.
    pub fn at(&self, row: u32, col: u32) -> Vertex {
        self.vertex(row, col)
            .unwrap_or_else(|| panic!("({row}, {col}) outside {}x{} map", self.height, self.width))
    }

    #[inline]
    pub fn cell(&self, v: Vertex) -> Cell {
        Cell {
            row: v.0 / self.width,
            col: v.0 % self.width,
        }
    }

    pub fn vertex_of(&self, cell: Cell) -> Option<Vertex> {
        self.vertex(cell.row, cell.col)
    }

    /// 4-connected neighbours in increasing index order (up, left, right, down).
    pub fn neighbors(&self, v: Vertex) -> impl Iterator<Item = Vertex> {
        let w = self.width;
        let row = v.0 / w;
        let col = v.0 % w;
        let up = (row > 0).then(|| Vertex(v.0 - w));
        let left = (col > 0).then(|| Vertex(v.0 - 1));
        let right = (col + 1 < w).then(|| Vertex(v.0 + 1));
        let down = (row + 1 < self.height).then(|| Vertex(v.0 + w));
        [up, left, right, down].into_iter().flatten()
    }

    pub fn adjacent(&self, u: Vertex, v: Vertex) -> bool {
        self.neighbors(u).any(|n| n == v)
    }

    pub fn vertices_of(&self, class: CellClass) -> Vec<Vertex> {
        self.vertices().filter(|&v| self.class(v) == class).collect()
    }

    pub fn pod_homes(&self) -> Vec<Vertex> {
        self.vertices_of(CellClass::PodHome)
    }

    pub fn workstations(&self) -> Vec<Vertex> {
        self.vertices_of(CellClass::Workstation)
    }

    pub fn reserved(&self) -> Vec<Vertex> {
        self.vertices_of(CellClass::Reserved)
    }

    /// Number of edges on a shortest path over the full graph, ignoring pods
    /// and disruptions. `None` when either vertex is outside the map.
    ///
    /// Every cell is a vertex, so this is the Manhattan distance.
    pub fn graph_distance(&self, u: Vertex, v: Vertex) -> Option<u32> {
        if !self.contains(u) || !self.contains(v) {
            return None;
        }
        let a = self.cell(u);
        let b = self.cell(v);
        Some(a.row.abs_diff(b.row) + a.col.abs_diff(b.col))
    }

    /// Breadth-first distances from `source` over vertices accepted by
    /// `passable`. The source itself is always expanded. Unreached vertices
    /// hold [`UNREACHABLE`].
    pub fn bfs_distances(&self, source: Vertex, passable: impl Fn(Vertex) -> bool) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.num_vertices()];
        let mut queue = VecDeque::new();
        dist[source.index()] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u.index()] + 1;
            for n in self.neighbors(u) {
                if dist[n.index()] == UNREACHABLE && passable(n) {
                    dist[n.index()] = d;
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    fn check_connected(&self) -> Result<(), MapError> {
        let open: Vec<Vertex> = self
            .vertices()
            .filter(|&v| self.class(v) != CellClass::PodHome)
            .collect();
        let Some(&first) = open.first() else {
            return Err(MapError::Disconnected(
                "map has no non-pod vertices".to_string(),
            ));
        };
        let dist = self.bfs_distances(first, |v| self.class(v) != CellClass::PodHome);
        if let Some(&v) = open.iter().find(|v| dist[v.index()] == UNREACHABLE) {
            return Err(MapError::Disconnected(format!(
                "non-pod cell {} is cut off from {}",
                self.cell(v),
                self.cell(first)
            )));
        }
        for home in self.pod_homes() {
            if !self
                .neighbors(home)
                .any(|n| self.class(n) != CellClass::PodHome)
            {
                return Err(MapError::Disconnected(format!(
                    "pod home {} has no adjacent floor cell",
                    self.cell(home)
                )));
            }
        }
        Ok(())
    }

    /// Writes the map in the ASCII format: `height N`, `width M`, then one
    /// line of class symbols per row.
    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(self.to_ascii().as_bytes())
    }

    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity(self.cells.len() + self.height as usize + 32);
        s.push_str(&format!("height {}\nwidth {}\n", self.height, self.width));
        for row in self.cells.chunks(self.width as usize) {
            s.extend(row.iter().map(|c| c.symbol()));
            s.push('\n');
        }
        s
    }

    pub fn read_from(input: impl BufRead) -> Result<Self, MapError> {
        let mut height = None;
        let mut width = None;
        let mut rows: Vec<String> = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if rows.is_empty() {
                if let Some(rest) = line.strip_prefix("height ") {
                    height = Some(parse_dim(rest, i + 1)?);
                    continue;
                }
                if let Some(rest) = line.strip_prefix("width ") {
                    width = Some(parse_dim(rest, i + 1)?);
                    continue;
                }
            }
            if line.is_empty() {
                continue;
            }
            rows.push(line.to_string());
        }
        let (Some(height), Some(width)) = (height, width) else {
            return Err(MapError::Parse {
                line: 1,
                message: "missing `height` or `width` header".to_string(),
            });
        };
        if rows.len() as u32 != height {
            return Err(MapError::Parse {
                line: 3,
                message: format!("header says {height} rows, found {}", rows.len()),
            });
        }
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        let map = Self::from_rows(&refs)?;
        if map.width != width {
            return Err(MapError::Parse {
                line: 3,
                message: format!("header says width {width}, rows have {}", map.width),
            });
        }
        Ok(map)
    }

    pub fn parse(text: &str) -> Result<Self, MapError> {
        Self::read_from(text.as_bytes())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, MapError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn parse_dim(s: &str, line: usize) -> Result<u32, MapError> {
    s.trim().parse().map_err(|_| MapError::Parse {
        line,
        message: format!("invalid dimension {s:?}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GridMap {
        GridMap::from_rows(&["R.R.", "....", ".@@.", "W..W"]).unwrap()
    }

    #[test]
    fn distance_identity_and_adjacent() {
        let m = small();
        let v = m.at(1, 1);
        assert_eq!(m.graph_distance(v, v), Some(0));
        assert_eq!(m.graph_distance(v, m.at(1, 2)), Some(1));
        assert_eq!(m.graph_distance(v, Vertex(999)), None);
    }

    #[test]
    fn neighbours_are_sorted_and_in_bounds() {
        let m = small();
        let n: Vec<_> = m.neighbors(m.at(0, 0)).collect();
        assert_eq!(n, vec![m.at(0, 1), m.at(1, 0)]);
        let n: Vec<_> = m.neighbors(m.at(2, 1)).collect();
        assert_eq!(n, vec![m.at(1, 1), m.at(2, 0), m.at(2, 2), m.at(3, 1)]);
    }

    #[test]
    fn ascii_round_trip() {
        let m = small();
        let text = m.to_ascii();
        assert!(text.starts_with("height 4\nwidth 4\n"));
        let back = GridMap::parse(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_ascii(), text);
    }

    #[test]
    fn rejects_enclosed_floor() {
        let err = GridMap::from_rows(&[".@.", "@@@", "..."]).unwrap_err();
        assert!(matches!(err, MapError::Disconnected(_)), "{err}");
    }

    #[test]
    fn rejects_unknown_symbol_and_bad_header() {
        assert!(matches!(
            GridMap::from_rows(&["..x"]),
            Err(MapError::Parse { .. })
        ));
        assert!(GridMap::parse("height 2\nwidth 3\n...\n").is_err());
        assert!(GridMap::parse("...\n").is_err());
    }

    #[test]
    fn classes_partition_vertices() {
        let m = small();
        assert_eq!(m.reserved(), vec![m.at(0, 0), m.at(0, 2)]);
        assert_eq!(m.pod_homes(), vec![m.at(2, 1), m.at(2, 2)]);
        assert_eq!(m.workstations(), vec![m.at(3, 0), m.at(3, 3)]);
    }
}
