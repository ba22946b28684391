//! Parametric warehouse layouts: 2-deep pod blocks separated by aisles,
//! a floor ring around the storage area, workstations on the outer border
//! and a strip of reserved parking cells on one border edge.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::MapError;
use crate::grid::{CellClass, GridMap};
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Edge {
    Top,
    Bottom,
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub height: u32,
    pub width: u32,
    /// Rows of pod blocks.
    pub block_rows: u32,
    /// Pod blocks per row.
    pub block_cols: u32,
    /// Pods along the aisle in one block.
    pub pods_per_block: u32,
    /// Pods across the block; every pod must touch an aisle, so 1 or 2.
    #[serde(default = "default_depth")]
    pub block_depth: u32,
    pub aisle_width: u32,
    pub workstation_spacing: u32,
    pub reserved_edge: Edge,
    #[serde(default = "default_reserved_spacing")]
    pub reserved_spacing: u32,
    /// Shift the workstation pattern on each edge by a seeded offset.
    #[serde(default)]
    pub jitter_workstations: bool,
}

fn default_depth() -> u32 {
    2
}

fn default_reserved_spacing() -> u32 {
    2
}

impl GeneratorConfig {
    pub fn medium() -> Self {
        GeneratorConfig {
            height: 24,
            width: 47,
            block_rows: 6,
            block_cols: 4,
            pods_per_block: 8,
            block_depth: 2,
            aisle_width: 1,
            workstation_spacing: 3,
            reserved_edge: Edge::Top,
            reserved_spacing: 2,
            jitter_workstations: false,
        }
    }

    pub fn large() -> Self {
        GeneratorConfig {
            height: 32,
            width: 75,
            block_rows: 8,
            block_cols: 6,
            pods_per_block: 10,
            ..Self::medium()
        }
    }

    pub fn large2wide() -> Self {
        GeneratorConfig {
            block_rows: 6,
            block_cols: 5,
            aisle_width: 2,
            ..Self::large()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "medium" => Some(Self::medium()),
            "large" => Some(Self::large()),
            "large2wide" | "large-2-wide" => Some(Self::large2wide()),
            _ => None,
        }
    }
}

/// Outer border ring plus the inner floor ring.
const MARGIN: u32 = 2;

fn span(blocks: u32, block: u32, aisle: u32) -> u32 {
    if blocks == 0 {
        0
    } else {
        blocks * block + (blocks - 1) * aisle
    }
}

pub fn generate_warehouse(config: &GeneratorConfig, seed: u64) -> Result<GridMap, MapError> {
    let c = config;
    if c.height == 0 || c.width == 0 {
        return Err(MapError::Dimensions("height and width must be positive".into()));
    }
    if !(1..=2).contains(&c.aisle_width) {
        return Err(MapError::Dimensions(format!(
            "aisle width must be 1 or 2, got {}",
            c.aisle_width
        )));
    }
    if !(1..=2).contains(&c.block_depth) {
        return Err(MapError::Dimensions(format!(
            "block depth must be 1 or 2, got {}",
            c.block_depth
        )));
    }
    if c.workstation_spacing == 0 || c.reserved_spacing == 0 {
        return Err(MapError::Dimensions("spacings must be positive".into()));
    }
    if c.height < 2 * MARGIN + 1 || c.width < 2 * MARGIN + 1 {
        return Err(MapError::Dimensions(format!(
            "{}x{} leaves no room inside the border rings",
            c.height, c.width
        )));
    }
    let has_pods = c.block_rows > 0 && c.block_cols > 0 && c.pods_per_block > 0;
    let inner_h = c.height - 2 * MARGIN;
    let inner_w = c.width - 2 * MARGIN;
    let need_h = if has_pods { span(c.block_rows, c.block_depth, c.aisle_width) } else { 0 };
    let need_w = if has_pods { span(c.block_cols, c.pods_per_block, c.aisle_width) } else { 0 };
    if need_h > inner_h || need_w > inner_w {
        return Err(MapError::Dimensions(format!(
            "pod blocks need {need_h}x{need_w} cells but only {inner_h}x{inner_w} fit inside a {}x{} map",
            c.height, c.width
        )));
    }

    let (h, w) = (c.height, c.width);
    let mut cells = vec![CellClass::Floor; (h * w) as usize];
    let idx = |r: u32, col: u32| (r * w + col) as usize;

    if has_pods {
        let top = MARGIN + (inner_h - need_h) / 2;
        let left = MARGIN + (inner_w - need_w) / 2;
        for br in 0..c.block_rows {
            let r0 = top + br * (c.block_depth + c.aisle_width);
            for bc in 0..c.block_cols {
                let c0 = left + bc * (c.pods_per_block + c.aisle_width);
                for r in r0..r0 + c.block_depth {
                    for col in c0..c0 + c.pods_per_block {
                        cells[idx(r, col)] = CellClass::PodHome;
                    }
                }
            }
        }
    }

    let mut rng = stream_rng(seed, Stream::MapGeneration);
    let edges = [Edge::Top, Edge::Bottom, Edge::Left, Edge::Right];
    for edge in edges {
        let (class, spacing) = if edge == c.reserved_edge {
            (CellClass::Reserved, c.reserved_spacing)
        } else {
            (CellClass::Workstation, c.workstation_spacing)
        };
        let len = match edge {
            Edge::Top | Edge::Bottom => w,
            Edge::Left | Edge::Right => h,
        };
        let offset = if class == CellClass::Workstation && c.jitter_workstations {
            rng.random_range(0..spacing)
        } else {
            0
        };
        // Corners stay floor so the outer ring is always walkable around them.
        let mut i = 1 + offset;
        while i + 1 < len {
            let (r, col) = match edge {
                Edge::Top => (0, i),
                Edge::Bottom => (h - 1, i),
                Edge::Left => (i, 0),
                Edge::Right => (i, w - 1),
            };
            cells[idx(r, col)] = class;
            i += spacing;
        }
    }

    GridMap::new(h, w, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_have_published_dimensions() {
        let m = generate_warehouse(&GeneratorConfig::medium(), 0).unwrap();
        assert_eq!((m.height(), m.width()), (24, 47));
        let l = generate_warehouse(&GeneratorConfig::large(), 0).unwrap();
        assert_eq!((l.height(), l.width()), (32, 75));
        let lw = generate_warehouse(&GeneratorConfig::large2wide(), 0).unwrap();
        assert_eq!((lw.height(), lw.width()), (32, 75));
        assert!(!m.workstations().is_empty());
        assert!(!m.reserved().is_empty());
        for v in m.reserved() {
            assert_eq!(m.cell(v).row, 0);
        }
    }

    #[test]
    fn medium_aisles_are_one_wide() {
        let m = generate_warehouse(&GeneratorConfig::medium(), 0).unwrap();
        // Some floor cell has pods directly above and below.
        let narrow = m.vertices().any(|v| {
            let c = m.cell(v);
            m.class(v) == CellClass::Floor
                && c.row > 0
                && c.row + 1 < m.height()
                && m.class(m.at(c.row - 1, c.col)) == CellClass::PodHome
                && m.class(m.at(c.row + 1, c.col)) == CellClass::PodHome
        });
        assert!(narrow);
    }

    #[test]
    fn zero_pod_rows_gives_open_grid() {
        let cfg = GeneratorConfig {
            block_rows: 0,
            ..GeneratorConfig::medium()
        };
        let m = generate_warehouse(&cfg, 3).unwrap();
        assert!(m.pod_homes().is_empty());
    }

    #[test]
    fn oversized_blocks_are_rejected() {
        let cfg = GeneratorConfig {
            block_rows: 20,
            ..GeneratorConfig::medium()
        };
        assert!(matches!(
            generate_warehouse(&cfg, 0),
            Err(MapError::Dimensions(_))
        ));
        let cfg = GeneratorConfig {
            aisle_width: 3,
            ..GeneratorConfig::medium()
        };
        assert!(matches!(
            generate_warehouse(&cfg, 0),
            Err(MapError::Dimensions(_))
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = GeneratorConfig {
            jitter_workstations: true,
            ..GeneratorConfig::large()
        };
        let a = generate_warehouse(&cfg, 1).unwrap().to_ascii();
        let b = generate_warehouse(&cfg, 1).unwrap().to_ascii();
        assert_eq!(a, b);
        let plain1 = generate_warehouse(&GeneratorConfig::large(), 1).unwrap();
        let plain2 = generate_warehouse(&GeneratorConfig::large(), 2).unwrap();
        assert_eq!(plain1.to_ascii(), plain2.to_ascii());
    }
}
