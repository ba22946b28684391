use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(AgentId, "a");
id_type!(PodId, "o");
id_type!(TaskId, "task");

/// Who a planned path belongs to: a robot, or a pod planned as a
/// self-propelled demi-agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Owner {
    Agent(AgentId),
    Demi(PodId),
}

impl Owner {
    pub fn is_demi(self) -> bool {
        matches!(self, Owner::Demi(_))
    }

    pub fn agent(self) -> Option<AgentId> {
        match self {
            Owner::Agent(a) => Some(a),
            Owner::Demi(_) => None,
        }
    }
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Owner::Agent(a) => a.fmt(f),
            Owner::Demi(o) => write!(f, "demi-{o}"),
        }
    }
}
