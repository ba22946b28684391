//! Stochastic vertex blockages spawned behind moving agents, their
//! bookkeeping, and trace import/export.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, LogError};
use crate::grid::Vertex;
use crate::ids::AgentId;
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cause {
    DroppedItem,
    AgentBreakdown,
}

impl Cause {
    pub const ALL: [Cause; 2] = [Cause::DroppedItem, Cause::AgentBreakdown];
}

/// A blocked vertex over the closed interval `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disruption {
    pub vertex: Vertex,
    pub start: u64,
    pub end: u64,
    pub cause: Cause,
}

impl Disruption {
    pub fn active_at(&self, t: u64) -> bool {
        self.start <= t && t <= self.end
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisruptionConfig {
    /// Probability per executed move of a dropped item.
    pub drop_rate: f64,
    /// Probability per executed move of a breakdown.
    pub breakdown_rate: f64,
    pub duration_min: u32,
    pub duration_max: u32,
}

impl Default for DisruptionConfig {
    fn default() -> Self {
        DisruptionConfig {
            drop_rate: 0.005,
            breakdown_rate: 0.005,
            duration_min: 40,
            duration_max: 60,
        }
    }
}

impl DisruptionConfig {
    pub fn none() -> Self {
        DisruptionConfig {
            drop_rate: 0.0,
            breakdown_rate: 0.0,
            ..Default::default()
        }
    }

    pub fn rate(&self, cause: Cause) -> f64 {
        match cause {
            Cause::DroppedItem => self.drop_rate,
            Cause::AgentBreakdown => self.breakdown_rate,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, r) in [("drop rate", self.drop_rate), ("breakdown rate", self.breakdown_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(ConfigError::Invalid(format!("{name} {r} outside [0, 1]")));
            }
        }
        if self.duration_min == 0 || self.duration_min > self.duration_max {
            return Err(ConfigError::Invalid(format!(
                "duration range [{}, {}] is empty or starts at zero",
                self.duration_min, self.duration_max
            )));
        }
        Ok(())
    }
}

/// One executed move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub agent: AgentId,
    pub from: Vertex,
    pub to: Vertex,
}

/// Draws disruptions from executed moves.
#[derive(Clone, Debug)]
pub struct DisruptionSampler {
    config: DisruptionConfig,
    rng: ChaCha8Rng,
}

impl DisruptionSampler {
    pub fn new(config: DisruptionConfig, seed: u64) -> Self {
        DisruptionSampler {
            config,
            rng: stream_rng(seed, Stream::Disruptions),
        }
    }

    pub fn config(&self) -> &DisruptionConfig {
        &self.config
    }

    /// Samples disruptions for the moves that brought the system to time
    /// `start`. Each hit blocks the vacated vertex from `start` on; hits on
    /// a vertex for which `occupied` holds are dropped.
    pub fn sample(
        &mut self,
        start: u64,
        moves: &[Move],
        occupied: impl Fn(Vertex) -> bool,
    ) -> Vec<Disruption> {
        let mut out = Vec::new();
        for m in moves {
            for cause in Cause::ALL {
                let rate = self.config.rate(cause);
                if rate <= 0.0 {
                    continue;
                }
                if !self.rng.random_bool(rate) {
                    continue;
                }
                let d = self
                    .rng
                    .random_range(self.config.duration_min..=self.config.duration_max);
                if occupied(m.from) {
                    continue;
                }
                out.push(Disruption {
                    vertex: m.from,
                    start,
                    end: start + d as u64 - 1,
                    cause,
                });
            }
        }
        out
    }
}

/// Where a run's disruptions come from.
#[derive(Clone, Debug)]
pub enum DisruptionSource {
    Live(DisruptionSampler),
    /// A recorded trace, consumed in order of start time.
    Replay { trace: Vec<Disruption>, next: usize },
}

/// Result of asking the source for disruptions starting at some time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Arrivals {
    pub accepted: Vec<Disruption>,
    /// Replayed entries whose vertex was occupied at their start.
    pub skipped: Vec<Disruption>,
}

impl DisruptionSource {
    pub fn replay(mut trace: Vec<Disruption>) -> Self {
        trace.sort_by_key(|d| d.start);
        DisruptionSource::Replay { trace, next: 0 }
    }

    pub fn disabled() -> Self {
        DisruptionSource::Live(DisruptionSampler::new(DisruptionConfig::none(), 0))
    }

    /// Disruptions starting at `start`, given the moves just executed.
    pub fn arrivals(
        &mut self,
        start: u64,
        moves: &[Move],
        occupied: impl Fn(Vertex) -> bool,
    ) -> Arrivals {
        match self {
            DisruptionSource::Live(s) => Arrivals {
                accepted: s.sample(start, moves, occupied),
                skipped: Vec::new(),
            },
            DisruptionSource::Replay { trace, next } => {
                let mut out = Arrivals::default();
                while *next < trace.len() && trace[*next].start <= start {
                    let d = trace[*next];
                    *next += 1;
                    if d.start < start {
                        continue;
                    }
                    if occupied(d.vertex) {
                        out.skipped.push(d);
                    } else {
                        out.accepted.push(d);
                    }
                }
                out
            }
        }
    }
}

/// Vertices visible to planners at one timestep. End times are not part of
/// this type.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Observation {
    /// Blocked from this timestep on.
    pub new: Vec<Vertex>,
    /// Every blocked vertex, including the new ones.
    pub active: Vec<Vertex>,
}

/// All disruptions known to a simulation, current and expired.
#[derive(Clone, Debug, Default)]
pub struct DisruptionBook {
    active: Vec<Disruption>,
}

impl DisruptionBook {
    pub fn add(&mut self, d: Disruption) {
        self.active.push(d);
    }

    /// Removes and returns disruptions that ended before `t`.
    pub fn expire(&mut self, t: u64) -> Vec<Disruption> {
        let (gone, keep): (Vec<_>, Vec<_>) = self.active.iter().partition(|d| d.end < t);
        self.active = keep;
        gone
    }

    pub fn observe(&self, t: u64) -> Observation {
        let mut obs = Observation::default();
        for d in &self.active {
            if d.active_at(t) {
                obs.active.push(d.vertex);
                if d.start == t {
                    obs.new.push(d.vertex);
                }
            }
        }
        for v in [&mut obs.new, &mut obs.active] {
            v.sort();
            v.dedup();
        }
        obs
    }

    pub fn started(&self, t: u64) -> impl Iterator<Item = &Disruption> {
        self.active.iter().filter(move |d| d.start == t)
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }
}

pub fn write_trace(mut out: impl Write, trace: &[Disruption]) -> std::io::Result<()> {
    for d in trace {
        serde_json::to_writer(&mut out, d)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace(input: impl BufRead) -> Result<Vec<Disruption>, LogError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let d: Disruption = serde_json::from_str(&line).map_err(|e| LogError::Record {
            line: i + 1,
            message: e.to_string(),
        })?;
        if d.end < d.start {
            return Err(LogError::Record {
                line: i + 1,
                message: "end precedes start".into(),
            });
        }
        out.push(d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mv(from: u32, to: u32) -> Move {
        Move {
            agent: AgentId(0),
            from: Vertex(from),
            to: Vertex(to),
        }
    }

    #[test]
    fn zero_rate_never_fires() {
        let mut s = DisruptionSampler::new(DisruptionConfig::none(), 3);
        for t in 0..1000 {
            assert!(s.sample(t, &[mv(1, 2)], |_| false).is_empty());
        }
    }

    #[test]
    fn rate_one_fires_once_per_cause() {
        let cfg = DisruptionConfig {
            drop_rate: 1.0,
            breakdown_rate: 1.0,
            ..Default::default()
        };
        let mut s = DisruptionSampler::new(cfg, 3);
        let out = s.sample(7, &[mv(1, 2)], |_| false);
        assert_eq!(out.len(), 2);
        for d in out {
            assert_eq!(d.vertex, Vertex(1));
            assert_eq!(d.start, 7);
            assert!((40..=60).contains(&(d.end - d.start + 1)));
        }
        assert!(s.sample(8, &[mv(1, 2)], |v| v == Vertex(1)).is_empty());
    }

    #[test]
    fn observe_window() {
        let mut book = DisruptionBook::default();
        book.add(Disruption {
            vertex: Vertex(4),
            start: 5,
            end: 10,
            cause: Cause::DroppedItem,
        });
        assert!(book.observe(4).active.is_empty());
        assert_eq!(book.observe(5).new, vec![Vertex(4)]);
        let six = book.observe(6);
        assert!(six.new.is_empty());
        assert_eq!(six.active, vec![Vertex(4)]);
        assert!(book.observe(11).active.is_empty());
        assert!(book.expire(11).len() == 1 && book.is_empty());
    }

    #[test]
    fn trace_round_trip_and_replay() {
        let trace = vec![
            Disruption {
                vertex: Vertex(3),
                start: 2,
                end: 45,
                cause: Cause::AgentBreakdown,
            },
            Disruption {
                vertex: Vertex(9),
                start: 4,
                end: 50,
                cause: Cause::DroppedItem,
            },
        ];
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let back = read_trace(&buf[..]).unwrap();
        assert_eq!(back, trace);
        let mut src = DisruptionSource::replay(back);
        assert!(src.arrivals(1, &[], |_| false).accepted.is_empty());
        assert_eq!(src.arrivals(2, &[], |_| false).accepted.len(), 1);
        let a = src.arrivals(4, &[], |v| v == Vertex(9));
        assert_eq!(a.skipped.len(), 1);
        assert!(a.accepted.is_empty());
    }

    #[test]
    fn bad_trace_line_is_named() {
        let text = "{\"vertex\":1,\"start\":0,\"end\":4,\"cause\":\"dropped-item\"}\nnot json\n";
        match read_trace(text.as_bytes()) {
            Err(LogError::Record { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
