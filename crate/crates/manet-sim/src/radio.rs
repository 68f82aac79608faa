//! Simplified shared wireless medium.
//!
//! Connectivity is unit-disk: two nodes hear each other iff their euclidean
//! distance is at most `range` (closed ball, so a node exactly at range is a
//! neighbor). A transmission reaches each potential receiver after the
//! serialization delay `size * 8 / data_rate` plus `prop_delay * distance`,
//! and survives an independent per-receiver loss draw. There is no
//! contention model; MAC-level collisions are approximated by `loss_prob`.
//! A sender never receives its own broadcast.

use serde::{Deserialize, Serialize};

use crate::mobility::MobilitySource;
use crate::packet::NodeId;
use crate::rng::RngStream;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Radio range in meters.
    pub range: f64,
    /// Channel data rate in bits per second.
    pub data_rate: u64,
    /// Independent per-frame, per-receiver loss probability in [0, 1].
    pub loss_prob: f64,
    /// Propagation delay in seconds per meter (0 disables it).
    pub prop_delay: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig { range: 250.0, data_rate: 2_000_000, loss_prob: 0.0, prop_delay: 0.0 }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !self.range.is_finite() || self.range <= 0.0 {
            return Err(format!("radio range must be positive, got {}", self.range));
        }
        if self.data_rate == 0 {
            return Err("data rate must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(format!("loss probability must be in [0,1], got {}", self.loss_prob));
        }
        if self.prop_delay < 0.0 {
            return Err("propagation delay must be nonnegative".into());
        }
        Ok(())
    }
}

/// A scheduled reception.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub to: NodeId,
    pub at: SimTime,
}

/// The medium: channel parameters applied to positions from a mobility
/// source. Holds no mutable state; loss draws come from the caller's stream.
#[derive(Debug, Clone)]
pub struct Radio {
    pub config: ChannelConfig,
}

impl Radio {
    pub fn new(config: ChannelConfig) -> Self {
        Radio { config }
    }

    /// Serialization delay for a frame of `bytes`, in whole microseconds,
    /// rounded up so any nonempty frame takes strictly positive time.
    pub fn serialization_delay_us(&self, bytes: u32) -> u64 {
        let bits = u64::from(bytes) * 8;
        bits.saturating_mul(1_000_000).div_ceil(self.config.data_rate)
    }

    fn delivery_time(&self, sent_at: SimTime, bytes: u32, distance_m: f64) -> SimTime {
        let prop_us = (self.config.prop_delay * distance_m * 1e6).round() as u64;
        sent_at + self.serialization_delay_us(bytes) + prop_us
    }

    /// All nodes within range of `node` at time `t`, ascending by id.
    /// `active` filters out nodes that are not radio-capable yet.
    pub fn neighbors<F>(
        &self,
        mobility: &MobilitySource,
        node: NodeId,
        t: SimTime,
        active: F,
    ) -> Vec<NodeId>
    where
        F: Fn(NodeId) -> bool,
    {
        let here = mobility.position_at(node.index(), t).expect("sender exists");
        let range2 = self.config.range * self.config.range;
        let mut out = Vec::new();
        for idx in 0..mobility.node_count() {
            let other = NodeId(idx as u32);
            if other == node || !active(other) {
                continue;
            }
            let pos = mobility.position_at(idx, t).expect("node exists");
            let dx = pos.x - here.x;
            let dy = pos.y - here.y;
            if dx * dx + dy * dy <= range2 {
                out.push(other);
            }
        }
        out
    }

    /// Plans a broadcast: every active neighbor draws loss independently;
    /// survivors are returned with their delivery times, ascending by id.
    pub fn plan_broadcast<F>(
        &self,
        mobility: &MobilitySource,
        sender: NodeId,
        t: SimTime,
        bytes: u32,
        loss_rng: &mut RngStream,
        active: F,
    ) -> Vec<Delivery>
    where
        F: Fn(NodeId) -> bool,
    {
        let here = mobility.position_at(sender.index(), t).expect("sender exists");
        let mut out = Vec::new();
        for idx in 0..mobility.node_count() {
            let to = NodeId(idx as u32);
            if to == sender || !active(to) {
                continue;
            }
            let pos = mobility.position_at(idx, t).expect("node exists");
            let dist = here.distance(&pos);
            if dist > self.config.range {
                continue;
            }
            if loss_rng.chance(self.config.loss_prob) {
                continue;
            }
            out.push(Delivery { to, at: self.delivery_time(t, bytes, dist) });
        }
        out
    }

    /// Plans a unicast: delivered iff `dst` is an active neighbor at `t` and
    /// the loss draw survives; otherwise silently dropped (upper layers
    /// detect the loss through their own timers or acknowledgments).
    #[allow(clippy::too_many_arguments)]
    pub fn plan_unicast<F>(
        &self,
        mobility: &MobilitySource,
        sender: NodeId,
        dst: NodeId,
        t: SimTime,
        bytes: u32,
        loss_rng: &mut RngStream,
        active: F,
    ) -> Option<Delivery>
    where
        F: Fn(NodeId) -> bool,
    {
        if dst == sender || !active(dst) {
            return None;
        }
        let here = mobility.position_at(sender.index(), t).expect("sender exists");
        let pos = mobility.position_at(dst.index(), t).expect("dst exists");
        let dist = here.distance(&pos);
        if dist > self.config.range {
            return None;
        }
        if loss_rng.chance(self.config.loss_prob) {
            return None;
        }
        Some(Delivery { to: dst, at: self.delivery_time(t, bytes, dist) })
    }

    /// Plans promiscuous receptions of a unicast: every active neighbor
    /// except the addressed one draws loss independently.
    #[allow(clippy::too_many_arguments)]
    pub fn plan_overhear<F>(
        &self,
        mobility: &MobilitySource,
        sender: NodeId,
        addressed: NodeId,
        t: SimTime,
        bytes: u32,
        loss_rng: &mut RngStream,
        active: F,
    ) -> Vec<Delivery>
    where
        F: Fn(NodeId) -> bool,
    {
        self.plan_broadcast(mobility, sender, t, bytes, loss_rng, |n| {
            n != addressed && active(n)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::Position;

    fn radio(range: f64, rate: u64, loss: f64) -> Radio {
        Radio::new(ChannelConfig { range, data_rate: rate, loss_prob: loss, prop_delay: 0.0 })
    }

    fn fixed(positions: &[(f64, f64)]) -> MobilitySource {
        let pts: Vec<Position> =
            positions.iter().map(|(x, y)| Position { x: *x, y: *y }).collect();
        MobilitySource::fixed(&pts).unwrap()
    }

    fn all(_: NodeId) -> bool {
        true
    }

    #[test]
    fn neighbors_within_range_are_mutual() {
        let mob = fixed(&[(0.0, 0.0), (50.0, 0.0)]);
        let r = radio(100.0, 1_000_000, 0.0);
        assert_eq!(r.neighbors(&mob, NodeId(0), SimTime::ZERO, all), vec![NodeId(1)]);
        assert_eq!(r.neighbors(&mob, NodeId(1), SimTime::ZERO, all), vec![NodeId(0)]);
    }

    #[test]
    fn out_of_range_nodes_are_not_neighbors() {
        let mob = fixed(&[(0.0, 0.0), (150.0, 0.0)]);
        let r = radio(100.0, 1_000_000, 0.0);
        assert!(r.neighbors(&mob, NodeId(0), SimTime::ZERO, all).is_empty());
        assert!(r.neighbors(&mob, NodeId(1), SimTime::ZERO, all).is_empty());
    }

    #[test]
    fn exactly_at_range_is_included() {
        let mob = fixed(&[(0.0, 0.0), (100.0, 0.0)]);
        let r = radio(100.0, 1_000_000, 0.0);
        assert_eq!(r.neighbors(&mob, NodeId(0), SimTime::ZERO, all), vec![NodeId(1)]);
    }

    #[test]
    fn serialization_delay_64b_at_1mbps_is_512us() {
        let r = radio(100.0, 1_000_000, 0.0);
        assert_eq!(r.serialization_delay_us(64), 512);
        let mob = fixed(&[(0.0, 0.0), (50.0, 0.0)]);
        let mut rng = RngStream::new(0, "loss");
        let plan = r.plan_broadcast(&mob, NodeId(0), SimTime::ZERO, 64, &mut rng, all);
        assert_eq!(plan, vec![Delivery { to: NodeId(1), at: SimTime::from_micros(512) }]);
    }

    #[test]
    fn delivery_strictly_after_send_for_nonempty_frames() {
        let r = radio(100.0, u64::MAX, 0.0);
        assert!(r.serialization_delay_us(1) >= 1);
        assert_eq!(r.serialization_delay_us(0), 0);
    }

    #[test]
    fn certain_loss_delivers_nothing() {
        let mob = fixed(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0), (30.0, 0.0)]);
        let r = radio(100.0, 1_000_000, 1.0);
        let mut rng = RngStream::new(0, "loss");
        assert!(r.plan_broadcast(&mob, NodeId(0), SimTime::ZERO, 64, &mut rng, all).is_empty());
        assert!(r
            .plan_unicast(&mob, NodeId(0), NodeId(1), SimTime::ZERO, 64, &mut rng, all)
            .is_none());
    }

    #[test]
    fn lossless_broadcast_reaches_every_neighbor() {
        let mob = fixed(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0), (500.0, 0.0)]);
        let r = radio(100.0, 1_000_000, 0.0);
        let mut rng = RngStream::new(0, "loss");
        let plan = r.plan_broadcast(&mob, NodeId(0), SimTime::ZERO, 64, &mut rng, all);
        // nodes 1 and 2 in range; node 3 out of range
        assert_eq!(plan.iter().map(|d| d.to).collect::<Vec<_>>(), vec![NodeId(1), NodeId(2)]);
    }

    #[test]
    fn unicast_cases() {
        let mob = fixed(&[(0.0, 0.0), (50.0, 0.0), (300.0, 0.0)]);
        let r = radio(100.0, 2_000_000, 0.0);
        let mut rng = RngStream::new(0, "loss");
        let hit = r.plan_unicast(&mob, NodeId(0), NodeId(1), SimTime::ZERO, 64, &mut rng, all);
        assert_eq!(hit, Some(Delivery { to: NodeId(1), at: SimTime::from_micros(256) }));
        let miss = r.plan_unicast(&mob, NodeId(0), NodeId(2), SimTime::ZERO, 64, &mut rng, all);
        assert_eq!(miss, None);
    }

    #[test]
    fn overhear_excludes_addressed_node() {
        let mob = fixed(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)]);
        let r = radio(100.0, 1_000_000, 0.0);
        let mut rng = RngStream::new(0, "loss");
        let plan =
            r.plan_overhear(&mob, NodeId(0), NodeId(1), SimTime::ZERO, 64, &mut rng, all);
        assert_eq!(plan.iter().map(|d| d.to).collect::<Vec<_>>(), vec![NodeId(2)]);
    }

    // Property: unit-disk symmetry on random static layouts.
    #[test]
    fn neighbor_relation_is_symmetric() {
        let mut rng = RngStream::new(3, "radio-test");
        for _ in 0..20 {
            let pts: Vec<(f64, f64)> = (0..25)
                .map(|_| (rng.range_f64(0.0, 867.0), rng.range_f64(0.0, 561.0)))
                .collect();
            let mob = fixed(&pts);
            let r = radio(250.0, 2_000_000, 0.0);
            let lists: Vec<Vec<NodeId>> = (0..25)
                .map(|i| r.neighbors(&mob, NodeId(i), SimTime::ZERO, all))
                .collect();
            for i in 0..25usize {
                for j in &lists[i] {
                    assert!(
                        lists[j.index()].contains(&NodeId(i as u32)),
                        "asymmetric neighborhood {i} vs {j}"
                    );
                }
            }
        }
    }
}
