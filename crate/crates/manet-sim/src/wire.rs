//! On-air message formats shared by the protocol agents.
//!
//! Frames are not serialized to bytes; only their accounted sizes matter
//! (serialization delay and control-byte counters). Sizes are fixed per
//! message type so normalized routing load is comparable across protocols.

use crate::packet::{DataPacket, NodeId, SourceRoute};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Control,
    Data,
}

/// One transmission on the shared medium.
#[derive(Debug, Clone)]
pub struct Frame {
    pub sender: NodeId,
    pub sent_at: SimTime,
    pub payload: FramePayload,
}

impl Frame {
    pub fn kind(&self) -> FrameKind {
        self.payload.kind()
    }

    /// Total frame size in bytes, protocol headers included.
    pub fn size(&self) -> u32 {
        self.payload.wire_size()
    }
}

#[derive(Debug, Clone)]
pub enum FramePayload {
    Data(DataPacket),
    AodvRreq(AodvRreq),
    AodvRrep(AodvRrep),
    AodvRerr(AodvRerr),
    AodvHello,
    DsdvUpdate(DsdvUpdate),
    DsrRreq(DsrRreq),
    DsrRrep(DsrRrep),
    DsrRerr(DsrRerr),
    DsrAck(DsrAck),
}

impl FramePayload {
    pub fn kind(&self) -> FrameKind {
        match self {
            FramePayload::Data(_) => FrameKind::Data,
            _ => FrameKind::Control,
        }
    }

    pub fn wire_size(&self) -> u32 {
        match self {
            // Hop-by-hop data carries the payload as-is; DSR adds its source
            // route: 8 bytes fixed plus 4 per listed node.
            FramePayload::Data(dp) => {
                dp.size
                    + dp.route
                        .as_ref()
                        .map(|r| 8 + 4 * r.0.len() as u32)
                        .unwrap_or(0)
            }
            FramePayload::AodvRreq(_) => 24,
            FramePayload::AodvRrep(_) => 20,
            FramePayload::AodvRerr(e) => 12 + 4 * e.unreachable.len() as u32,
            FramePayload::AodvHello => 12,
            FramePayload::DsdvUpdate(u) => 12 + 12 * u.entries.len() as u32,
            FramePayload::DsrRreq(r) => 16 + 4 * r.record.len() as u32,
            FramePayload::DsrRrep(r) => 16 + 4 * r.discovered.0.len() as u32,
            FramePayload::DsrRerr(_) => 16,
            FramePayload::DsrAck(_) => 8,
        }
    }

    /// Short label for event traces.
    pub fn label(&self) -> &'static str {
        match self {
            FramePayload::Data(_) => "data",
            FramePayload::AodvRreq(_) => "aodv-rreq",
            FramePayload::AodvRrep(_) => "aodv-rrep",
            FramePayload::AodvRerr(_) => "aodv-rerr",
            FramePayload::AodvHello => "aodv-hello",
            FramePayload::DsdvUpdate(_) => "dsdv-update",
            FramePayload::DsrRreq(_) => "dsr-rreq",
            FramePayload::DsrRrep(_) => "dsr-rrep",
            FramePayload::DsrRerr(_) => "dsr-rerr",
            FramePayload::DsrAck(_) => "dsr-ack",
        }
    }
}

/// AODV route request, flooded network-wide. `(origin, rreq_seq)` is the
/// duplicate-suppression key.
#[derive(Debug, Clone)]
pub struct AodvRreq {
    pub origin: NodeId,
    pub rreq_seq: u64,
    pub origin_seq: u64,
    pub dst: NodeId,
    /// Last destination sequence number the origin knew, if any.
    pub dst_seq_known: Option<u64>,
    /// Hops travelled so far; increments by exactly one per rebroadcast.
    pub hop_count: u32,
    pub ttl: u32,
}

/// AODV route reply, unicast hop-by-hop along the reverse route.
#[derive(Debug, Clone)]
pub struct AodvRrep {
    pub origin: NodeId,
    pub dst: NodeId,
    pub dst_seq: u64,
    /// Hops from the transmitting node to `dst`.
    pub hop_count: u32,
}

/// AODV route error: destinations now unreachable via the sender, each with
/// its bumped (odd under DSDV conventions, simply incremented here)
/// sequence number.
#[derive(Debug, Clone)]
pub struct AodvRerr {
    pub unreachable: Vec<(NodeId, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsdvUpdateKind {
    FullDump,
    Incremental,
}

/// One advertised DSDV table row. `hops == u32::MAX` marks a broken route.
#[derive(Debug, Clone, Copy)]
pub struct DsdvAdvert {
    pub dst: NodeId,
    pub hops: u32,
    pub seq: u64,
}

#[derive(Debug, Clone)]
pub struct DsdvUpdate {
    pub kind: DsdvUpdateKind,
    pub entries: Vec<DsdvAdvert>,
}

/// DSR route request: accumulates the traversed node list.
#[derive(Debug, Clone)]
pub struct DsrRreq {
    pub origin: NodeId,
    pub req_seq: u64,
    pub target: NodeId,
    /// Nodes traversed so far, origin first; grows by one per forward and
    /// never contains duplicates.
    pub record: Vec<NodeId>,
}

/// DSR route reply, source-routed back along `back_route`.
#[derive(Debug, Clone)]
pub struct DsrRrep {
    /// The complete discovered route, origin first, target last.
    pub discovered: SourceRoute,
    /// Path this reply itself follows (replier first, requester last).
    pub back_route: SourceRoute,
}

/// DSR route error, source-routed back to the packet source.
#[derive(Debug, Clone)]
pub struct DsrRerr {
    pub broken_from: NodeId,
    pub broken_to: NodeId,
    pub back_route: SourceRoute,
}

/// Per-hop explicit acknowledgment for DSR data maintenance.
#[derive(Debug, Clone, Copy)]
pub struct DsrAck {
    pub packet: crate::packet::PacketId,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{PacketId, SourceRoute};

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    #[test]
    fn data_frame_sizes() {
        let plain = FramePayload::Data(DataPacket {
            id: PacketId(0),
            src: n(0),
            dst: n(1),
            size: 64,
            ttl: 32,
            route: None,
            salvage_count: 0,
            trail: vec![n(0)],
        });
        assert_eq!(plain.wire_size(), 64);
        assert_eq!(plain.kind(), FrameKind::Data);

        let routed = FramePayload::Data(DataPacket {
            id: PacketId(0),
            src: n(0),
            dst: n(2),
            size: 64,
            ttl: 32,
            route: Some(SourceRoute(vec![n(0), n(1), n(2)])),
            salvage_count: 0,
            trail: vec![n(0)],
        });
        // payload + 8 + 4 per listed node
        assert_eq!(routed.wire_size(), 64 + 8 + 12);
    }

    #[test]
    fn control_frame_sizes() {
        assert_eq!(FramePayload::AodvHello.wire_size(), 12);
        let rerr = FramePayload::AodvRerr(AodvRerr { unreachable: vec![(n(1), 3), (n(2), 5)] });
        assert_eq!(rerr.wire_size(), 12 + 8);
        let dump = FramePayload::DsdvUpdate(DsdvUpdate {
            kind: DsdvUpdateKind::FullDump,
            entries: vec![DsdvAdvert { dst: n(0), hops: 0, seq: 2 }; 4],
        });
        assert_eq!(dump.wire_size(), 12 + 48);
        assert_eq!(dump.kind(), FrameKind::Control);
    }
}
