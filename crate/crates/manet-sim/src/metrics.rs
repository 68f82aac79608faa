//! Run counters and the four comparison metrics.
//!
//! Two delivery-ratio conventions coexist deliberately:
//!
//! * [`pdr`] — the conventional ratio, received / sent, in [0, 1].
//! * [`paper_pdr`] — sent / received x 100, rounded to two decimals: the
//!   convention some published comparison tables print. It is the exact
//!   reciprocal of `pdr` scaled by 100, so `paper_pdr * pdr = 100` wherever
//!   both are defined.
//!
//! Undefined quotients (no packets received) are reported as `f64::INFINITY`
//! and serialize as the literal string `inf`.

use std::collections::BTreeMap;

use crate::packet::DropReason;

/// Counters accumulated over one run.
#[derive(Debug, Default, Clone)]
pub struct MetricsAccumulator {
    /// Data packets generated by sources.
    pub sent: u64,
    /// Data packets delivered to their destination (deduplicated).
    pub received: u64,
    /// Data transmissions performed by intermediate nodes (not first-hop
    /// sends, not deliveries).
    pub forwarded: u64,
    /// Control frames transmitted (each broadcast or unicast counts once).
    pub control_tx: u64,
    pub control_bytes: u64,
    /// Payload bytes of delivered data packets.
    pub data_bytes_received: u64,
    /// Per-packet end-to-end latency samples, microseconds.
    pub latency_samples_us: Vec<u64>,
    pub drops: BTreeMap<DropReason, u64>,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on_control_tx(&mut self, bytes: u32) {
        self.control_tx += 1;
        self.control_bytes += u64::from(bytes);
    }

    pub fn on_forward(&mut self) {
        self.forwarded += 1;
    }

    pub fn on_sent(&mut self) {
        self.sent += 1;
    }

    pub fn on_delivered(&mut self, payload_bytes: u32, latency_us: u64) {
        self.received += 1;
        self.data_bytes_received += u64::from(payload_bytes);
        self.latency_samples_us.push(latency_us);
    }

    pub fn on_drop(&mut self, reason: DropReason) {
        *self.drops.entry(reason).or_insert(0) += 1;
    }

    pub fn dropped_total(&self) -> u64 {
        self.drops.values().sum()
    }
}

/// Conventional packet delivery ratio: received / sent, 0 when nothing was
/// sent. `received > sent` indicates broken accounting and panics.
pub fn pdr(sent: u64, received: u64) -> f64 {
    assert!(received <= sent, "accounting error: received {received} > sent {sent}");
    if sent == 0 {
        0.0
    } else {
        received as f64 / sent as f64
    }
}

/// The tabulated ratio: sent / received x 100, rounded to two decimals.
/// Undefined (infinite) when nothing was received.
pub fn paper_pdr(sent: u64, received: u64) -> f64 {
    if received == 0 {
        return f64::INFINITY;
    }
    let raw = sent as f64 / received as f64 * 100.0;
    (raw * 100.0).round() / 100.0
}

/// Bytes per second over the run duration.
pub fn throughput(data_bytes_received: u64, duration_s: f64) -> f64 {
    assert!(duration_s > 0.0, "duration must be positive");
    data_bytes_received as f64 / duration_s
}

/// Arithmetic mean of end-to-end delays in seconds; infinite marker when no
/// packet was delivered. Negative samples indicate broken accounting.
pub fn avg_e2e_delay(samples_us: &[u64]) -> f64 {
    if samples_us.is_empty() {
        return f64::INFINITY;
    }
    let sum: u128 = samples_us.iter().map(|s| u128::from(*s)).sum();
    sum as f64 / samples_us.len() as f64 / 1e6
}

/// Normalized routing load: control transmissions per delivered data packet.
pub fn nrl(control_tx: u64, received: u64) -> f64 {
    match (control_tx, received) {
        (0, 0) => 0.0,
        (_, 0) => f64::INFINITY,
        _ => control_tx as f64 / received as f64,
    }
}
