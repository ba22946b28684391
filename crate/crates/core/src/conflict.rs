use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::grid::Vertex;
use crate::ids::Owner;
use crate::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ConflictKind {
    Vertex { at: Vertex },
    /// The first agent moves `from -> to`, the second `to -> from`.
    Edge { from: Vertex, to: Vertex },
}

/// A collision between two paths; `first < second`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Conflict {
    pub timestep: u32,
    pub first: Owner,
    pub second: Owner,
    pub kind: ConflictKind,
}

impl Conflict {
    fn sort_key(&self) -> (u32, Owner, Owner, ConflictKind) {
        (self.timestep, self.first, self.second, self.kind)
    }
}

/// Every vertex and edge conflict at relative timestep `t < window`,
/// ordered by timestep, then owner pair.
pub fn detect_collisions(paths: &[Path], window: u32) -> Vec<Conflict> {
    let mut out = Vec::new();
    let mut at: FxHashMap<Vertex, Vec<usize>> = FxHashMap::default();
    for t in 0..window as usize {
        at.clear();
        for (i, p) in paths.iter().enumerate() {
            at.entry(p.at(t)).or_default().push(i);
        }
        for (&v, owners) in &at {
            for x in 0..owners.len() {
                for y in x + 1..owners.len() {
                    let (a, b) = ordered(paths[owners[x]].owner, paths[owners[y]].owner);
                    out.push(Conflict {
                        timestep: t as u32,
                        first: a,
                        second: b,
                        kind: ConflictKind::Vertex { at: v },
                    });
                }
            }
        }
        // Swaps: someone moves u -> v while someone who was at v moves to u.
        for (i, p) in paths.iter().enumerate() {
            let (u, v) = (p.at(t), p.at(t + 1));
            if u == v {
                continue;
            }
            if let Some(others) = at.get(&v) {
                for &j in others {
                    if j > i && paths[j].at(t + 1) == u {
                        let (first, second, from, to) = if p.owner < paths[j].owner {
                            (p.owner, paths[j].owner, u, v)
                        } else {
                            (paths[j].owner, p.owner, v, u)
                        };
                        out.push(Conflict {
                            timestep: t as u32,
                            first,
                            second,
                            kind: ConflictKind::Edge { from, to },
                        });
                    }
                }
            }
        }
    }
    out.sort_by_key(Conflict::sort_key);
    out
}

/// First conflict only, with the same ordering as [`detect_collisions`].
pub fn first_collision(paths: &[Path], window: u32) -> Option<Conflict> {
    detect_collisions(paths, window).into_iter().next()
}

fn ordered(a: Owner, b: Owner) -> (Owner, Owner) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::AgentId;

    fn path(id: u32, v: &[u32]) -> Path {
        Path::from_vertices(
            Owner::Agent(AgentId(id)),
            0,
            v.iter().map(|&x| Vertex(x)).collect(),
        )
    }

    #[test]
    fn disjoint_paths_do_not_collide() {
        let ps = [path(1, &[0, 1, 2, 3]), path(2, &[10, 11, 12, 13])];
        assert!(detect_collisions(&ps, 4).is_empty());
    }

    #[test]
    fn vertex_conflict_instance() {
        let ps = [path(1, &[0, 1, 2, 7]), path(2, &[4, 5, 6, 7])];
        let c = detect_collisions(&ps, 4);
        assert_eq!(
            c,
            vec![Conflict {
                timestep: 3,
                first: Owner::Agent(AgentId(1)),
                second: Owner::Agent(AgentId(2)),
                kind: ConflictKind::Vertex { at: Vertex(7) },
            }]
        );
        // Outside the window it is ignored.
        assert!(detect_collisions(&ps, 3).is_empty());
    }

    #[test]
    fn edge_conflict_instance() {
        let ps = [path(2, &[9, 9, 5, 4]), path(1, &[8, 8, 4, 5])];
        let c = detect_collisions(&ps, 4);
        assert_eq!(
            c,
            vec![Conflict {
                timestep: 2,
                first: Owner::Agent(AgentId(1)),
                second: Owner::Agent(AgentId(2)),
                kind: ConflictKind::Edge {
                    from: Vertex(4),
                    to: Vertex(5)
                },
            }]
        );
    }

    #[test]
    fn following_is_not_a_conflict() {
        let ps = [path(1, &[1, 2, 3]), path(2, &[0, 1, 2])];
        assert!(detect_collisions(&ps, 3).is_empty());
    }

    #[test]
    fn three_way_vertex_conflict_reports_all_pairs() {
        let ps = [path(1, &[0, 5]), path(2, &[4, 5]), path(3, &[6, 5])];
        let c = detect_collisions(&ps, 2);
        assert_eq!(c.len(), 3);
        assert!(c.windows(2).all(|w| w[0].sort_key() <= w[1].sort_key()));
    }
}
