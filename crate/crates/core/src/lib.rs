//! Lifelong multi-agent pickup and delivery on warehouse grids, with
//! disruption-triggered relocation of movable pods.

pub mod conflict;
pub mod disruption;
pub mod error;
pub mod events;
pub mod experiment;
pub mod generator;
pub mod grid;
pub mod ids;
pub mod metrics;
pub mod occupancy;
pub mod path;
pub mod pbs;
pub mod planner;
pub mod priority;
pub mod reservation;
pub mod rng;
pub mod sim;
pub mod task;
pub mod terraform;
