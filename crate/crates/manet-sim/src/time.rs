//! Simulation time as integer microseconds.
//!
//! All internal bookkeeping runs on whole microseconds so that event
//! ordering never depends on floating-point rounding. Seconds only appear
//! at the configuration and reporting boundary.

use std::fmt;
use std::ops::{Add, Sub};

/// One instant of simulated time, in microseconds since the start of the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

pub const MICROS_PER_SEC: u64 = 1_000_000;

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    /// Converts seconds to a time instant, rounding to the nearest microsecond.
    pub fn from_secs_f64(secs: f64) -> Self {
        assert!(secs >= 0.0 && secs.is_finite(), "time must be finite and nonnegative");
        SimTime((secs * MICROS_PER_SEC as f64).round() as u64)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SEC as f64
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;

    /// Advances by a duration in microseconds.
    fn add(self, micros: u64) -> SimTime {
        SimTime(self.0 + micros)
    }
}

impl Sub for SimTime {
    type Output = u64;

    /// Difference in microseconds. Panics if `other` is later than `self`.
    fn sub(self, other: SimTime) -> u64 {
        self.0 - other.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// Converts a duration in seconds to whole microseconds (nearest).
pub fn secs_to_micros(secs: f64) -> u64 {
    assert!(secs >= 0.0 && secs.is_finite(), "duration must be finite and nonnegative");
    (secs * MICROS_PER_SEC as f64).round() as u64
}
