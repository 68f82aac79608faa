//! The contract every routing protocol implements.
//!
//! The three protocols differ in lifecycle — DSDV maintains its table
//! continuously through periodic updates, while AODV and DSR start a
//! discovery only when traffic needs a route and buffer the packet until one
//! is found — but all of them speak to the simulator through this one
//! interface: frames in, frames out, timers, and metric signals. An agent
//! only ever transmits through the [`crate::net::NetCtx`] radio operations,
//! which charge each control transmission to the control counter exactly
//! once.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::net::NetCtx;
use crate::packet::{DataPacket, NodeId, PacketId, SourceRoute};
use crate::time::SimTime;
use crate::wire::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Aodv,
    Dsdv,
    Dsr,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Aodv, Protocol::Dsdv, Protocol::Dsr];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Aodv => "aodv",
            Protocol::Dsdv => "dsdv",
            Protocol::Dsr => "dsr",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aodv" => Ok(Protocol::Aodv),
            "dsdv" => Ok(Protocol::Dsdv),
            "dsr" => Ok(Protocol::Dsr),
            other => Err(format!("unknown protocol '{other}' (expected aodv, dsdv or dsr)")),
        }
    }
}

/// Timers an agent can arm for itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimerKind {
    DsdvPeriodic,
    DsdvSettling,
    DsdvBufferTimeout(PacketId),
    AodvHello,
    AodvRreqRetry(NodeId),
    DsrRreqRetry(NodeId),
    DsrAckTimeout { next_hop: NodeId, packet: PacketId },
}

impl TimerKind {
    pub fn label(&self) -> &'static str {
        match self {
            TimerKind::DsdvPeriodic => "dsdv-periodic",
            TimerKind::DsdvSettling => "dsdv-settling",
            TimerKind::DsdvBufferTimeout(_) => "dsdv-buffer-timeout",
            TimerKind::AodvHello => "aodv-hello",
            TimerKind::AodvRreqRetry(_) => "aodv-rreq-retry",
            TimerKind::DsrRreqRetry(_) => "dsr-rreq-retry",
            TimerKind::DsrAckTimeout { .. } => "dsr-ack-timeout",
        }
    }
}

/// How a data transmission's fate feeds back to its sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckPolicy {
    /// No recovery layer watches this frame: a radio loss terminates the
    /// packet with a link-loss drop.
    None,
    /// The sender learns of a failed transmission after a detection delay
    /// (models the absence of a passive acknowledgment).
    DetectFailure { after_us: u64 },
    /// The receiver acknowledges explicitly; losses surface through the
    /// sender's own retransmission timers.
    ExplicitAck,
}

/// A routing protocol instance living at one node.
pub trait RoutingAgent {
    fn protocol(&self) -> Protocol;

    /// Called once before the run starts; arms initial timers.
    fn start(&mut self, ctx: &mut NetCtx);

    /// A data packet originated at this node and needs to be sent.
    fn on_data(&mut self, ctx: &mut NetCtx, pkt: DataPacket);

    /// A frame addressed to (or broadcast at) this node arrived.
    fn on_frame(&mut self, ctx: &mut NetCtx, frame: Frame);

    /// A frame addressed to somebody else was overheard (promiscuous mode).
    fn on_overhear(&mut self, _ctx: &mut NetCtx, _frame: &Frame) {}

    /// One of this agent's timers fired.
    fn on_timer(&mut self, ctx: &mut NetCtx, kind: TimerKind);

    /// A data transmission toward `next_hop` was detected as failed
    /// (only under [`AckPolicy::DetectFailure`]).
    fn on_send_failed(&mut self, _ctx: &mut NetCtx, _next_hop: NodeId, _pkt: DataPacket) {}

    /// Installed hop count toward `dst`, if a usable route exists at `now`.
    fn route_hops(&self, _dst: NodeId, _now: SimTime) -> Option<u32> {
        None
    }

    /// Forwarding-table snapshot (valid entries only); used by loop checks.
    fn table_snapshot(&self) -> Vec<RouteSnapshot> {
        Vec::new()
    }

    /// Shortest cached source route toward `dst`, for source-routing
    /// protocols.
    fn cached_route(&self, _dst: NodeId, _now: SimTime) -> Option<SourceRoute> {
        None
    }
}

/// One valid forwarding entry as seen at snapshot time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteSnapshot {
    pub dst: NodeId,
    pub next_hop: NodeId,
    pub hops: u32,
    pub seq: u64,
}

/// FIFO send buffer with drop-oldest overflow, shared by all protocols.
/// Holds packets waiting for a route.
#[derive(Debug)]
pub struct SendBuffer {
    queue: VecDeque<(DataPacket, SimTime)>,
    capacity: usize,
}

impl SendBuffer {
    pub fn new(capacity: usize) -> Self {
        SendBuffer { queue: VecDeque::new(), capacity }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Enqueues a packet; at capacity the oldest packet is evicted and
    /// returned so the caller can count the drop.
    pub fn push(&mut self, pkt: DataPacket, now: SimTime) -> Option<DataPacket> {
        let evicted = if self.queue.len() >= self.capacity {
            self.queue.pop_front().map(|(p, _)| p)
        } else {
            None
        };
        self.queue.push_back((pkt, now));
        evicted
    }

    /// Removes and returns all packets toward `dst`, oldest first.
    pub fn take_for(&mut self, dst: NodeId) -> Vec<DataPacket> {
        let mut taken = Vec::new();
        self.queue.retain(|(p, _)| {
            if p.dst == dst {
                taken.push(p.clone());
                false
            } else {
                true
            }
        });
        taken
    }

    /// Removes one specific packet if it is still buffered.
    pub fn remove(&mut self, id: PacketId) -> Option<DataPacket> {
        let idx = self.queue.iter().position(|(p, _)| p.id == id)?;
        self.queue.remove(idx).map(|(p, _)| p)
    }

    pub fn has_packet_for(&self, dst: NodeId) -> bool {
        self.queue.iter().any(|(p, _)| p.dst == dst)
    }

    /// Destinations with at least one buffered packet, deduplicated.
    pub fn pending_destinations(&self) -> Vec<NodeId> {
        let mut dsts: Vec<NodeId> = self.queue.iter().map(|(p, _)| p.dst).collect();
        dsts.sort_unstable();
        dsts.dedup();
        dsts
    }
}
