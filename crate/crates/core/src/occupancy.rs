//! Dynamic pod placement and the per-timestep passability snapshot.

use serde::{Deserialize, Serialize};

use crate::grid::{CellClass, GridMap, Vertex};
use crate::ids::{AgentId, PodId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "at", content = "where")]
pub enum PodLocation {
    Home,
    Carried(AgentId),
    Parked(Vertex),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PodStatus {
    AtHome,
    Carried,
    ParkedAtReserved,
    ParkedAwaitingRestore,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PodState {
    pub id: PodId,
    pub home: Vertex,
    pub location: PodLocation,
    /// Agent whose task currently owns this pod, if any.
    pub assigned: Option<AgentId>,
}

impl PodState {
    pub fn at_home(id: PodId, home: Vertex) -> Self {
        PodState {
            id,
            home,
            location: PodLocation::Home,
            assigned: None,
        }
    }

    pub fn status(&self, map: &GridMap) -> PodStatus {
        match self.location {
            PodLocation::Home => PodStatus::AtHome,
            PodLocation::Carried(_) => PodStatus::Carried,
            PodLocation::Parked(v) if map.class(v) == CellClass::Reserved => {
                PodStatus::ParkedAtReserved
            }
            PodLocation::Parked(_) => PodStatus::ParkedAwaitingRestore,
        }
    }

    /// Vertex the pod rests on, or `None` while it is carried.
    pub fn resting_vertex(&self) -> Option<Vertex> {
        match self.location {
            PodLocation::Home => Some(self.home),
            PodLocation::Parked(v) => Some(v),
            PodLocation::Carried(_) => None,
        }
    }
}

/// Pods on the map, one per pod-home cell, with ids in home order.
pub fn pods_for(map: &GridMap) -> Vec<PodState> {
    map.pod_homes()
        .into_iter()
        .enumerate()
        .map(|(i, home)| PodState::at_home(PodId(i as u32), home))
        .collect()
}

/// Passability snapshot at one timestep: resting pods and active
/// disruption vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupancyView {
    pub timestep: u64,
    resting: Vec<Option<PodId>>,
    disrupted: Vec<bool>,
    assigned: Vec<Option<AgentId>>,
}

impl OccupancyView {
    pub fn new(
        map: &GridMap,
        timestep: u64,
        pods: &[PodState],
        disrupted: impl IntoIterator<Item = Vertex>,
    ) -> Self {
        let mut resting = vec![None; map.num_vertices()];
        let mut assigned = vec![None; pods.len()];
        for pod in pods {
            if let Some(v) = pod.resting_vertex() {
                resting[v.index()] = Some(pod.id);
            }
            assigned[pod.id.index()] = pod.assigned;
        }
        let mut d = vec![false; map.num_vertices()];
        for v in disrupted {
            d[v.index()] = true;
        }
        OccupancyView {
            timestep,
            resting,
            disrupted: d,
            assigned,
        }
    }

    /// A snapshot with no pods and no disruptions.
    pub fn empty(map: &GridMap) -> Self {
        Self::new(map, 0, &[], [])
    }

    /// A snapshot where every pod-home cell holds a resting pod.
    pub fn all_pods_home(map: &GridMap) -> Self {
        Self::new(map, 0, &pods_for(map), [])
    }

    #[inline]
    pub fn pod_at(&self, v: Vertex) -> Option<PodId> {
        self.resting[v.index()]
    }

    #[inline]
    pub fn is_disrupted(&self, v: Vertex) -> bool {
        self.disrupted[v.index()]
    }

    pub fn disrupted_vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.disrupted
            .iter()
            .enumerate()
            .filter(|(_, d)| **d)
            .map(|(i, _)| Vertex(i as u32))
    }

    pub fn assigned_agent(&self, pod: PodId) -> Option<AgentId> {
        self.assigned.get(pod.index()).copied().flatten()
    }

    /// True iff `v` hosts an active disruption, or a resting pod that is not
    /// assigned to `agent`.
    pub fn blocked_at(&self, v: Vertex, agent: AgentId) -> bool {
        if self.disrupted[v.index()] {
            return true;
        }
        match self.resting[v.index()] {
            Some(pod) => self.assigned_agent(pod) != Some(agent),
            None => false,
        }
    }

    /// Blocked for everyone: disruptions and every resting pod.
    #[inline]
    pub fn blocked_static(&self, v: Vertex) -> bool {
        self.disrupted[v.index()] || self.resting[v.index()].is_some()
    }

    /// Copy with the given vertices additionally disrupted.
    pub fn with_disruptions(&self, extra: impl IntoIterator<Item = Vertex>) -> Self {
        let mut out = self.clone();
        for v in extra {
            out.disrupted[v.index()] = true;
        }
        out
    }

    /// Copy in which the listed pods no longer block their cells; used when
    /// those pods are planned as demi-agents.
    pub fn without_pods(&self, pods: &[PodId]) -> Self {
        let mut out = self.clone();
        for slot in out.resting.iter_mut() {
            if let Some(p) = slot {
                if pods.contains(p) {
                    *slot = None;
                }
            }
        }
        out
    }
}
