//! Node positions over time.
//!
//! A [`MobilitySource`] answers "where is node i at time t" from per-node
//! waypoint chains. Chains come either from the synthetic random-waypoint
//! generator or from a SUMO floating-car-data trace (see [`crate::fcd`]).
//! Queries interpolate linearly between bracketing waypoints and clamp to
//! the first/last waypoint outside the covered span.

use thiserror::Error;

use crate::rng::RngStream;
use crate::time::{secs_to_micros, SimTime};

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// A timestamped position sample. Consecutive waypoints of one node have
/// strictly increasing times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub at: SimTime,
    pub pos: Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityKind {
    RandomWaypoint,
    Trace,
}

#[derive(Debug, Error)]
pub enum MobilityError {
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("arena must have positive area, got {0} x {1} m")]
    ZeroAreaArena(f64, f64),
    #[error("need at least one node")]
    NoNodes,
    #[error("speed range invalid: min {0} > max {1}")]
    BadSpeedRange(f64, f64),
    #[error("duration must be positive")]
    ZeroDuration,
    #[error("node {0} has no waypoints")]
    EmptyTrack(usize),
    #[error("node {0} has non-increasing waypoint times")]
    NonMonotoneTrack(usize),
}

/// Per-node waypoint chains plus the arena they live in.
#[derive(Debug, Clone)]
pub struct MobilitySource {
    kind: MobilityKind,
    tracks: Vec<Vec<Waypoint>>,
    arena: Option<(f64, f64)>,
    /// Original vehicle ids for trace sources, in node-id order.
    names: Option<Vec<String>>,
}

impl MobilitySource {
    pub(crate) fn from_tracks(
        kind: MobilityKind,
        tracks: Vec<Vec<Waypoint>>,
        arena: Option<(f64, f64)>,
        names: Option<Vec<String>>,
    ) -> Self {
        debug_assert!(tracks.iter().all(|t| !t.is_empty()), "every node has >= 1 waypoint");
        debug_assert!(tracks
            .iter()
            .all(|t| t.windows(2).all(|w| w[0].at < w[1].at)));
        MobilitySource { kind, tracks, arena, names }
    }

    pub fn kind(&self) -> MobilityKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        self.tracks.len()
    }

    pub fn arena(&self) -> Option<(f64, f64)> {
        self.arena
    }

    /// Vehicle id of a trace node, if this source came from a trace.
    pub fn node_name(&self, node: usize) -> Option<&str> {
        self.names.as_ref().and_then(|n| n.get(node)).map(String::as_str)
    }

    pub(crate) fn track(&self, node: usize) -> &[Waypoint] {
        &self.tracks[node]
    }

    /// Time of the node's first sample. Trace vehicles that appear
    /// mid-trace are radio-silent before this instant.
    pub fn first_sample_at(&self, node: usize) -> Result<SimTime, MobilityError> {
        self.tracks
            .get(node)
            .map(|t| t[0].at)
            .ok_or(MobilityError::UnknownNode(node))
    }

    /// Position of `node` at time `t`: piecewise-linear between bracketing
    /// waypoints, constant beyond the first/last one.
    pub fn position_at(&self, node: usize, t: SimTime) -> Result<Position, MobilityError> {
        let track = self.tracks.get(node).ok_or(MobilityError::UnknownNode(node))?;
        let first = track.first().expect("nonempty track");
        let last = track.last().expect("nonempty track");
        if t <= first.at {
            return Ok(first.pos);
        }
        if t >= last.at {
            return Ok(last.pos);
        }
        // Index of the first waypoint strictly after t.
        let hi = track.partition_point(|w| w.at <= t);
        let a = &track[hi - 1];
        let b = &track[hi];
        let span = (b.at - a.at) as f64;
        let frac = (t - a.at) as f64 / span;
        Ok(Position {
            x: a.pos.x + (b.pos.x - a.pos.x) * frac,
            y: a.pos.y + (b.pos.y - a.pos.y) * frac,
        })
    }

    /// Generates random-waypoint motion: each node starts at a uniform
    /// point, then repeatedly travels to a uniform destination at a uniform
    /// speed in `[speed_min, speed_max]` and pauses for `pause_s`, until the
    /// chain covers `duration_s`.
    pub fn random_waypoint(
        n_nodes: usize,
        arena: (f64, f64),
        speed_min: f64,
        speed_max: f64,
        pause_s: f64,
        duration_s: f64,
        rng: &mut RngStream,
    ) -> Result<Self, MobilityError> {
        if n_nodes == 0 {
            return Err(MobilityError::NoNodes);
        }
        if !(arena.0 > 0.0 && arena.1 > 0.0) {
            return Err(MobilityError::ZeroAreaArena(arena.0, arena.1));
        }
        if speed_min > speed_max || speed_min < 0.0 {
            return Err(MobilityError::BadSpeedRange(speed_min, speed_max));
        }
        if duration_s <= 0.0 {
            return Err(MobilityError::ZeroDuration);
        }
        let end = secs_to_micros(duration_s);
        let pause_us = secs_to_micros(pause_s);

        let mut tracks = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let start = Position {
                x: rng.range_f64(0.0, arena.0),
                y: rng.range_f64(0.0, arena.1),
            };
            let mut track = vec![Waypoint { at: SimTime::ZERO, pos: start }];
            if speed_max <= 0.0 {
                tracks.push(track);
                continue;
            }
            let mut t = 0u64;
            let mut here = start;
            while t < end {
                let dest = Position {
                    x: rng.range_f64(0.0, arena.0),
                    y: rng.range_f64(0.0, arena.1),
                };
                let speed = rng.range_f64(speed_min.max(f64::MIN_POSITIVE), speed_max);
                // Ceil keeps the realized speed at or below the drawn speed
                // after rounding to whole microseconds.
                let travel_us = ((here.distance(&dest) / speed) * 1e6).ceil() as u64;
                if travel_us == 0 {
                    continue; // destination coincides with current point
                }
                t += travel_us;
                track.push(Waypoint { at: SimTime::from_micros(t), pos: dest });
                here = dest;
                if pause_us > 0 {
                    t += pause_us;
                    track.push(Waypoint { at: SimTime::from_micros(t), pos: dest });
                }
            }
            tracks.push(track);
        }
        Ok(MobilitySource::from_tracks(
            MobilityKind::RandomWaypoint,
            tracks,
            Some(arena),
            None,
        ))
    }

    /// Builds a source from explicit per-node waypoint chains (scripted
    /// motion). Every node needs at least one waypoint and strictly
    /// increasing times.
    pub fn from_waypoints(tracks: Vec<Vec<Waypoint>>) -> Result<Self, MobilityError> {
        if tracks.is_empty() {
            return Err(MobilityError::NoNodes);
        }
        for (node, track) in tracks.iter().enumerate() {
            if track.is_empty() {
                return Err(MobilityError::EmptyTrack(node));
            }
            if !track.windows(2).all(|w| w[0].at < w[1].at) {
                return Err(MobilityError::NonMonotoneTrack(node));
            }
        }
        Ok(MobilitySource::from_tracks(MobilityKind::Trace, tracks, None, None))
    }

    /// A source where every node sits still at a fixed position. Used for
    /// static topologies in tests and degenerate scenarios.
    pub fn fixed(positions: &[Position]) -> Result<Self, MobilityError> {
        if positions.is_empty() {
            return Err(MobilityError::NoNodes);
        }
        let tracks = positions
            .iter()
            .map(|p| vec![Waypoint { at: SimTime::ZERO, pos: *p }])
            .collect();
        Ok(MobilitySource::from_tracks(MobilityKind::Trace, tracks, None, None))
    }
}
