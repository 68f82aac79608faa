//! Data-packet identity and end-to-end accounting.
//!
//! Every application packet gets a [`PacketRecord`] in the run's
//! [`PacketRegistry`] the moment it is generated. The registry is the
//! simulator's global observer: it tracks the node trail, the terminal state
//! (delivered or dropped, first transition wins) and enforces the
//! conservation identity `sent = received + dropped + outstanding`.

use std::collections::BTreeMap;
use std::fmt;

use crate::time::SimTime;

/// Node identity within one run. Dense, starting at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Unique per-run data packet id (index into the registry).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u64);

/// Why a packet left the system without reaching its destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DropReason {
    /// No route available within the buffering policy (includes buffer
    /// overflow and proactive-buffer timeout).
    NoRoute,
    /// Route discovery exhausted its retries.
    Unreachable,
    /// Hop budget exhausted.
    Ttl,
    /// Lost on the air with no recovery layer watching.
    LinkLoss,
    /// Per-hop maintenance gave up and no salvage route existed.
    RouteError,
    /// Source-routed header did not list the node holding the packet.
    CorruptHeader,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DropReason::NoRoute => "no-route",
            DropReason::Unreachable => "unreachable",
            DropReason::Ttl => "ttl",
            DropReason::LinkLoss => "link-loss",
            DropReason::RouteError => "route-error",
            DropReason::CorruptHeader => "corrupt-header",
        };
        f.write_str(s)
    }
}

/// A full source route, src first and dst last, with no repeated node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRoute(pub Vec<NodeId>);

impl SourceRoute {
    pub fn src(&self) -> NodeId {
        *self.0.first().expect("route is nonempty")
    }

    pub fn dst(&self) -> NodeId {
        *self.0.last().expect("route is nonempty")
    }

    pub fn hops(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn position(&self, node: NodeId) -> Option<usize> {
        self.0.iter().position(|n| *n == node)
    }

    pub fn is_valid(&self) -> bool {
        if self.0.len() < 2 {
            return false;
        }
        let mut seen = std::collections::HashSet::new();
        self.0.iter().all(|n| seen.insert(*n))
    }
}

/// The mobile part of a data packet: what travels inside frames.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPacket {
    pub id: PacketId,
    pub src: NodeId,
    pub dst: NodeId,
    /// Application payload bytes (protocol headers are added per frame).
    pub size: u32,
    /// Remaining hop budget; decremented at each forwarding node.
    pub ttl: u32,
    /// Full path for source-routed protocols; `None` for hop-by-hop ones.
    pub route: Option<SourceRoute>,
    /// How many times per-hop maintenance has rerouted this packet.
    pub salvage_count: u8,
    /// Nodes this copy has passed through, source first. Simulator
    /// bookkeeping, not wire bytes.
    pub trail: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketState {
    /// Buffered at some node or in flight.
    Outstanding,
    Delivered,
    Dropped(DropReason),
}

#[derive(Debug, Clone)]
pub struct PacketRecord {
    pub src: NodeId,
    pub dst: NodeId,
    pub size: u32,
    pub created_at: SimTime,
    pub delivered_at: Option<SimTime>,
    /// Node trail of the copy that reached a terminal state, source first.
    pub hops_visited: Vec<NodeId>,
    /// Header route of the delivered copy, for source-routed protocols.
    pub final_route: Option<SourceRoute>,
    pub state: PacketState,
}

/// Global per-run packet ledger.
#[derive(Debug, Default)]
pub struct PacketRegistry {
    records: Vec<PacketRecord>,
}

impl PacketRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a freshly generated packet and returns its id.
    pub fn create(&mut self, src: NodeId, dst: NodeId, size: u32, at: SimTime) -> PacketId {
        let id = PacketId(self.records.len() as u64);
        self.records.push(PacketRecord {
            src,
            dst,
            size,
            created_at: at,
            delivered_at: None,
            hops_visited: vec![src],
            final_route: None,
            state: PacketState::Outstanding,
        });
        id
    }

    pub fn record(&self, id: PacketId) -> &PacketRecord {
        &self.records[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records the trail and header route of the copy reaching a terminal
    /// state. No-op once the packet is already terminal.
    pub fn settle_path(&mut self, id: PacketId, trail: &[NodeId], route: Option<&SourceRoute>) {
        let rec = &mut self.records[id.0 as usize];
        if rec.state == PacketState::Outstanding {
            rec.hops_visited = trail.to_vec();
            rec.final_route = route.cloned();
        }
    }

    /// Marks delivery. Returns true the first time only; duplicate
    /// deliveries of the same packet id count once.
    pub fn delivered(&mut self, id: PacketId, at: SimTime) -> bool {
        let rec = &mut self.records[id.0 as usize];
        match rec.state {
            PacketState::Outstanding => {
                rec.state = PacketState::Delivered;
                rec.delivered_at = Some(at);
                debug_assert!(at >= rec.created_at);
                true
            }
            _ => false,
        }
    }

    /// Marks a drop. Returns true iff this was the packet's first terminal
    /// transition.
    pub fn dropped(&mut self, id: PacketId, reason: DropReason) -> bool {
        let rec = &mut self.records[id.0 as usize];
        match rec.state {
            PacketState::Outstanding => {
                rec.state = PacketState::Dropped(reason);
                true
            }
            _ => false,
        }
    }

    pub fn latency_us(&self, id: PacketId) -> Option<u64> {
        let rec = self.record(id);
        rec.delivered_at.map(|d| d - rec.created_at)
    }

    /// (sent, received, dropped-by-reason, outstanding) — the conservation
    /// identity `sent = received + Σ dropped + outstanding` holds by
    /// construction; callers assert it at end of run.
    pub fn accounting(&self) -> Accounting {
        let mut acc = Accounting {
            sent: self.records.len() as u64,
            ..Accounting::default()
        };
        for rec in &self.records {
            match rec.state {
                PacketState::Outstanding => acc.outstanding += 1,
                PacketState::Delivered => acc.received += 1,
                PacketState::Dropped(reason) => {
                    *acc.drops.entry(reason).or_insert(0) += 1;
                }
            }
        }
        acc
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Accounting {
    pub sent: u64,
    pub received: u64,
    pub outstanding: u64,
    pub drops: BTreeMap<DropReason, u64>,
}

impl Accounting {
    pub fn dropped_total(&self) -> u64 {
        self.drops.values().sum()
    }

    pub fn balances(&self) -> bool {
        self.sent == self.received + self.dropped_total() + self.outstanding
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    #[test]
    fn settled_path_overwrites_initial_trail_once() {
        let mut reg = PacketRegistry::new();
        let id = reg.create(n(0), n(2), 64, SimTime::ZERO);
        assert_eq!(reg.record(id).hops_visited, vec![n(0)]);
        reg.settle_path(id, &[n(0), n(1), n(2)], None);
        reg.delivered(id, SimTime::from_micros(5));
        // later copies cannot rewrite a terminal packet's path
        reg.settle_path(id, &[n(0), n(9)], None);
        assert_eq!(reg.record(id).hops_visited, vec![n(0), n(1), n(2)]);
    }

    #[test]
    fn duplicate_delivery_counts_once() {
        let mut reg = PacketRegistry::new();
        let id = reg.create(n(0), n(1), 64, SimTime::ZERO);
        assert!(reg.delivered(id, SimTime::from_micros(10)));
        assert!(!reg.delivered(id, SimTime::from_micros(20)));
        let acc = reg.accounting();
        assert_eq!(acc.received, 1);
        assert_eq!(reg.latency_us(id), Some(10));
    }

    #[test]
    fn terminal_state_is_sticky() {
        let mut reg = PacketRegistry::new();
        let id = reg.create(n(0), n(1), 64, SimTime::ZERO);
        assert!(reg.dropped(id, DropReason::Ttl));
        assert!(!reg.delivered(id, SimTime::from_micros(5)));
        assert!(!reg.dropped(id, DropReason::NoRoute));
        let acc = reg.accounting();
        assert_eq!(acc.drops.get(&DropReason::Ttl), Some(&1));
        assert_eq!(acc.received, 0);
    }

    #[test]
    fn accounting_identity_balances() {
        let mut reg = PacketRegistry::new();
        for i in 0..10 {
            reg.create(n(0), n(1), 64, SimTime::from_micros(i));
        }
        reg.delivered(PacketId(0), SimTime::from_micros(100));
        reg.delivered(PacketId(1), SimTime::from_micros(100));
        reg.dropped(PacketId(2), DropReason::NoRoute);
        reg.dropped(PacketId(3), DropReason::Unreachable);
        let acc = reg.accounting();
        assert_eq!(acc.sent, 10);
        assert_eq!(acc.received, 2);
        assert_eq!(acc.dropped_total(), 2);
        assert_eq!(acc.outstanding, 6);
        assert!(acc.balances());
    }

    #[test]
    fn source_route_validity() {
        assert!(SourceRoute(vec![n(0), n(1), n(2)]).is_valid());
        assert!(!SourceRoute(vec![n(0)]).is_valid());
        assert!(!SourceRoute(vec![n(0), n(1), n(0)]).is_valid());
        let r = SourceRoute(vec![n(3), n(5), n(9)]);
        assert_eq!(r.src(), n(3));
        assert_eq!(r.dst(), n(9));
        assert_eq!(r.hops(), 2);
        assert_eq!(r.position(n(5)), Some(1));
        assert_eq!(r.position(n(7)), None);
    }
}
