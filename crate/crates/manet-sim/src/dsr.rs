//! Dynamic source routing (reactive, full-path headers).
//!
//! Discovery floods a request whose header accumulates the traversed node
//! list; the target (or a node with a fresh cached route) answers with the
//! complete path, which the origin then carries in every data packet. Each
//! hop unicasts to its successor in the header and waits for an explicit
//! per-hop acknowledgment, retransmitting up to a bounded number of times;
//! when a hop dies the node purges every cached route using that link,
//! reports a route error to the source and, if an alternate cached route
//! exists, salvages the packet onto it by rewriting the header. With
//! promiscuous mode on (the default), nodes also cache route suffixes from
//! any source-routed frame they receive or overhear.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::agent::{AckPolicy, Protocol, RouteSnapshot, RoutingAgent, SendBuffer, TimerKind};
use crate::event::EventHandle;
use crate::net::{DsrParams, NetCtx};
use crate::packet::{DataPacket, DropReason, NodeId, PacketId, SourceRoute};
use crate::time::{secs_to_micros, SimTime};
use crate::wire::{DsrAck, DsrRerr, DsrRrep, DsrRreq, Frame, FramePayload};

#[derive(Debug, Clone)]
struct CacheEntry {
    /// Path from this node (inclusive) to the destination (inclusive).
    route: Vec<NodeId>,
    inserted_at: SimTime,
}

#[derive(Debug)]
struct PendingDiscovery {
    attempts: u32,
    retry_timer: EventHandle,
}

#[derive(Debug)]
struct MaintEntry {
    pkt: DataPacket,
    next_hop: NodeId,
    retransmits: u32,
    timer: EventHandle,
}

pub struct DsrAgent {
    node: NodeId,
    params: DsrParams,
    req_seq: u64,
    cache: BTreeMap<NodeId, Vec<CacheEntry>>,
    pending: BTreeMap<NodeId, PendingDiscovery>,
    buffer: SendBuffer,
    seen: HashMap<(NodeId, u64), SimTime>,
    /// Packets awaiting a per-hop acknowledgment, by packet id.
    maint: BTreeMap<PacketId, MaintEntry>,
    /// Data packets this node has already forwarded or delivered
    /// (duplicates are re-acknowledged but not re-processed).
    processed: HashSet<PacketId>,
}

impl DsrAgent {
    pub fn new(node: NodeId, params: &crate::net::ProtocolParams) -> Self {
        DsrAgent {
            node,
            params: params.dsr,
            req_seq: 0,
            cache: BTreeMap::new(),
            pending: BTreeMap::new(),
            buffer: SendBuffer::new(params.buffer_capacity),
            seen: HashMap::new(),
            maint: BTreeMap::new(),
            processed: HashSet::new(),
        }
    }

    // ---- route cache ----------------------------------------------------

    /// Caches a route from this node to `route.last()`. Kept per
    /// destination, shortest first, bounded capacity, bounded age.
    fn cache_insert(&mut self, route: Vec<NodeId>, now: SimTime) {
        if route.len() < 2 || route[0] != self.node {
            return;
        }
        let mut uniq = HashSet::new();
        if !route.iter().all(|n| uniq.insert(*n)) {
            return;
        }
        let dst = *route.last().expect("nonempty");
        let entries = self.cache.entry(dst).or_default();
        if let Some(existing) = entries.iter_mut().find(|e| e.route == route) {
            existing.inserted_at = now;
            return;
        }
        entries.push(CacheEntry { route, inserted_at: now });
        entries.sort_by_key(|e| e.route.len());
        entries.truncate(self.params.cache_capacity);
    }

    /// Shortest unexpired cached route to `dst`, expired entries pruned.
    fn cache_lookup(&mut self, dst: NodeId, now: SimTime) -> Option<Vec<NodeId>> {
        let ttl = secs_to_micros(self.params.cache_ttl);
        let entries = self.cache.get_mut(&dst)?;
        entries.retain(|e| now.saturating_sub(e.inserted_at).as_micros() <= ttl);
        if entries.is_empty() {
            self.cache.remove(&dst);
            return None;
        }
        Some(entries[0].route.clone())
    }

    /// Expiry-aware existence check that leaves the cache untouched.
    fn has_fresh_route(&self, dst: NodeId, now: SimTime) -> bool {
        let ttl = secs_to_micros(self.params.cache_ttl);
        self.cache.get(&dst).is_some_and(|entries| {
            entries.iter().any(|e| now.saturating_sub(e.inserted_at).as_micros() <= ttl)
        })
    }

    /// Removes every cached route that crosses the (undirected) link a-b.
    fn cache_purge_link(&mut self, a: NodeId, b: NodeId) {
        self.cache.retain(|_, entries| {
            entries.retain(|e| {
                !e.route
                    .windows(2)
                    .any(|w| (w[0] == a && w[1] == b) || (w[0] == b && w[1] == a))
            });
            !entries.is_empty()
        });
    }

    // ---- discovery -------------------------------------------------------

    fn discover(&mut self, ctx: &mut NetCtx, target: NodeId, attempts: u32) {
        self.req_seq += 1;
        self.seen.insert((self.node, self.req_seq), ctx.now());
        let rreq = DsrRreq {
            origin: self.node,
            req_seq: self.req_seq,
            target,
            record: vec![self.node],
        };
        ctx.broadcast_control(self.node, FramePayload::DsrRreq(rreq));
        let retry_timer = ctx.schedule_timer(
            self.node,
            secs_to_micros(self.params.rreq_retry),
            TimerKind::DsrRreqRetry(target),
        );
        self.pending.insert(target, PendingDiscovery { attempts, retry_timer });
    }

    fn retry_fired(&mut self, ctx: &mut NetCtx, target: NodeId) {
        let Some(p) = self.pending.remove(&target) else { return };
        if self.cache_lookup(target, ctx.now()).is_some() {
            self.flush_routable(ctx);
            return;
        }
        if p.attempts >= self.params.rreq_retries {
            for pkt in self.buffer.take_for(target) {
                ctx.drop_data(&pkt, DropReason::Unreachable);
            }
        } else {
            self.discover(ctx, target, p.attempts + 1);
        }
    }

    fn seen_before(&mut self, key: (NodeId, u64), now: SimTime) -> bool {
        let window = secs_to_micros(self.params.seen_cache);
        match self.seen.get(&key) {
            Some(at) if now.saturating_sub(*at).as_micros() <= window => true,
            _ => {
                self.seen.insert(key, now);
                false
            }
        }
    }

    // ---- data path -------------------------------------------------------

    fn try_send(&mut self, ctx: &mut NetCtx, mut pkt: DataPacket) {
        if pkt.dst == self.node {
            ctx.deliver(self.node, &pkt);
            return;
        }
        match self.cache_lookup(pkt.dst, ctx.now()) {
            Some(route) => {
                let next = route[1];
                pkt.route = Some(SourceRoute(route));
                self.first_transmit(ctx, pkt, next);
            }
            None => {
                let target = pkt.dst;
                if let Some(evicted) = self.buffer.push(pkt, ctx.now()) {
                    ctx.drop_data(&evicted, DropReason::NoRoute);
                }
                if !self.pending.contains_key(&target) {
                    self.discover(ctx, target, 1);
                }
            }
        }
    }

    /// First transmission of this packet over its next hop: spends one unit
    /// of hop budget and arms maintenance. Retransmissions reuse the budget.
    fn first_transmit(&mut self, ctx: &mut NetCtx, mut pkt: DataPacket, next_hop: NodeId) {
        if pkt.ttl == 0 {
            ctx.drop_data(&pkt, DropReason::Ttl);
            return;
        }
        pkt.ttl -= 1;
        self.transmit_and_arm(ctx, pkt, next_hop, 0);
    }

    fn transmit_and_arm(
        &mut self,
        ctx: &mut NetCtx,
        pkt: DataPacket,
        next_hop: NodeId,
        retransmits: u32,
    ) {
        ctx.send_data(self.node, next_hop, pkt.clone(), AckPolicy::ExplicitAck, true);
        let timer = ctx.schedule_timer(
            self.node,
            secs_to_micros(self.params.ack_timeout),
            TimerKind::DsrAckTimeout { next_hop, packet: pkt.id },
        );
        self.maint.insert(pkt.id, MaintEntry { pkt, next_hop, retransmits, timer });
    }

    fn ack_received(&mut self, ctx: &mut NetCtx, ack: DsrAck, from: NodeId) {
        if self.maint.get(&ack.packet).is_some_and(|m| m.next_hop == from) {
            let m = self.maint.remove(&ack.packet).expect("just checked");
            ctx.cancel_timer(m.timer);
        }
    }

    fn ack_timeout_fired(&mut self, ctx: &mut NetCtx, next_hop: NodeId, packet: PacketId) {
        let Some(m) = self.maint.remove(&packet) else { return };
        if m.next_hop != next_hop {
            self.maint.insert(packet, m); // stale timer from an earlier hop
            return;
        }
        if m.retransmits < self.params.max_retransmits {
            self.transmit_and_arm(ctx, m.pkt, next_hop, m.retransmits + 1);
            return;
        }
        // Link declared dead: purge, report to the source, then salvage.
        self.cache_purge_link(self.node, next_hop);
        let pkt = m.pkt;
        let route = pkt.route.as_ref().expect("dsr data carries a route");
        if let Some(pos) = route.position(self.node) {
            if pos > 0 {
                let mut back: Vec<NodeId> = route.0[..=pos].to_vec();
                back.reverse();
                let rerr = DsrRerr {
                    broken_from: self.node,
                    broken_to: next_hop,
                    back_route: SourceRoute(back.clone()),
                };
                ctx.unicast_control(self.node, back[1], FramePayload::DsrRerr(rerr), false);
            }
        }
        self.salvage_or_drop(ctx, pkt);
    }

    /// Rewrites the header onto an alternate cached route if one exists and
    /// keeps the path loop-free; otherwise the packet is gone.
    fn salvage_or_drop(&mut self, ctx: &mut NetCtx, mut pkt: DataPacket) {
        if pkt.salvage_count >= self.params.max_salvages {
            ctx.drop_data(&pkt, DropReason::RouteError);
            return;
        }
        let Some(alt) = self.cache_lookup(pkt.dst, ctx.now()) else {
            ctx.drop_data(&pkt, DropReason::RouteError);
            return;
        };
        let route = pkt.route.as_ref().expect("dsr data carries a route");
        let pos = route.position(self.node).unwrap_or(0);
        let mut rewritten: Vec<NodeId> = route.0[..pos].to_vec();
        rewritten.extend_from_slice(&alt);
        let rewritten = SourceRoute(rewritten);
        if !rewritten.is_valid() {
            ctx.drop_data(&pkt, DropReason::RouteError);
            return;
        }
        let next = alt[1];
        pkt.salvage_count += 1;
        pkt.route = Some(rewritten);
        // Hop budget for this hop was spent on the first attempt.
        self.transmit_and_arm(ctx, pkt, next, 0);
    }

    /// Sends buffered packets that the cache can now serve and clears
    /// satisfied discoveries.
    fn flush_routable(&mut self, ctx: &mut NetCtx) {
        let now = ctx.now();
        for dst in self.buffer.pending_destinations() {
            if self.cache_lookup(dst, now).is_some() {
                for pkt in self.buffer.take_for(dst) {
                    self.try_send(ctx, pkt);
                }
            }
        }
        let satisfied: Vec<NodeId> = self
            .pending
            .keys()
            .copied()
            .filter(|d| self.has_fresh_route(*d, now))
            .collect();
        for dst in satisfied {
            if let Some(p) = self.pending.remove(&dst) {
                ctx.cancel_timer(p.retry_timer);
            }
        }
    }

    // ---- control handling ------------------------------------------------

    fn handle_rreq(&mut self, ctx: &mut NetCtx, rreq: DsrRreq, _from: NodeId) {
        let now = ctx.now();
        if rreq.origin == self.node || rreq.record.contains(&self.node) {
            return;
        }
        if self.seen_before((rreq.origin, rreq.req_seq), now) {
            return;
        }
        // The accumulated record is a working path back to the origin.
        let mut reverse = vec![self.node];
        reverse.extend(rreq.record.iter().rev());
        self.cache_insert(reverse, now);
        self.flush_routable(ctx);

        if rreq.target == self.node {
            let mut full = rreq.record.clone();
            full.push(self.node);
            let mut back = full.clone();
            back.reverse();
            let rrep = DsrRrep {
                discovered: SourceRoute(full),
                back_route: SourceRoute(back.clone()),
            };
            ctx.unicast_control(self.node, back[1], FramePayload::DsrRrep(rrep), true);
            return;
        }
        // A cached route lets an intermediate answer for the target, as
        // long as splicing it onto the record stays loop-free.
        if let Some(cached) = self.cache_lookup(rreq.target, now) {
            let mut full = rreq.record.clone();
            full.extend_from_slice(&cached);
            let spliced = SourceRoute(full);
            if spliced.is_valid() {
                let mut back = rreq.record.clone();
                back.push(self.node);
                back.reverse();
                let rrep = DsrRrep { discovered: spliced, back_route: SourceRoute(back.clone()) };
                ctx.unicast_control(self.node, back[1], FramePayload::DsrRrep(rrep), true);
                return;
            }
        }
        // Flooding continues; the no-duplicate record also bounds depth.
        if rreq.record.len() < ctx.params.ttl as usize {
            let mut fwd = rreq;
            fwd.record.push(self.node);
            ctx.broadcast_control(self.node, FramePayload::DsrRreq(fwd));
        }
    }

    fn handle_rrep(&mut self, ctx: &mut NetCtx, rrep: DsrRrep, _from: NodeId) {
        let now = ctx.now();
        if let Some(pos) = rrep.discovered.position(self.node) {
            if pos + 1 < rrep.discovered.0.len() {
                self.cache_insert(rrep.discovered.0[pos..].to_vec(), now);
            }
        }
        self.flush_routable(ctx);

        let back = &rrep.back_route;
        if back.dst() == self.node {
            // Discovery complete at the origin.
            if let Some(p) = self.pending.remove(&rrep.discovered.dst()) {
                ctx.cancel_timer(p.retry_timer);
            }
            return;
        }
        if let Some(pos) = back.position(self.node) {
            let next = back.0[pos + 1];
            ctx.unicast_control(self.node, next, FramePayload::DsrRrep(rrep), true);
        }
    }

    fn handle_rerr(&mut self, ctx: &mut NetCtx, rerr: DsrRerr, _from: NodeId) {
        self.cache_purge_link(rerr.broken_from, rerr.broken_to);
        let back = &rerr.back_route;
        if back.dst() == self.node {
            return;
        }
        if let Some(pos) = back.position(self.node) {
            let next = back.0[pos + 1];
            ctx.unicast_control(self.node, next, FramePayload::DsrRerr(rerr), false);
        }
    }

    fn handle_data(&mut self, ctx: &mut NetCtx, mut pkt: DataPacket, from: NodeId) {
        // Per-hop confirmation: acknowledge every copy, even duplicates.
        ctx.unicast_control(self.node, from, FramePayload::DsrAck(DsrAck { packet: pkt.id }), false);
        if !self.processed.insert(pkt.id) {
            return;
        }
        pkt.trail.push(self.node);
        let Some(route) = pkt.route.clone() else {
            ctx.drop_data(&pkt, DropReason::CorruptHeader);
            return;
        };
        if let Some(pos) = route.position(self.node) {
            if pos + 1 < route.0.len() {
                self.cache_insert(route.0[pos..].to_vec(), ctx.now());
            }
        }
        if pkt.dst == self.node {
            ctx.deliver(self.node, &pkt);
            return;
        }
        match route.position(self.node) {
            Some(pos) if pos + 1 < route.0.len() => {
                let next = route.0[pos + 1];
                self.first_transmit(ctx, pkt, next);
            }
            _ => ctx.drop_data(&pkt, DropReason::CorruptHeader),
        }
    }
}

impl RoutingAgent for DsrAgent {
    fn protocol(&self) -> Protocol {
        Protocol::Dsr
    }

    fn start(&mut self, _ctx: &mut NetCtx) {
        // Purely reactive: nothing to do until traffic arrives.
    }

    fn on_data(&mut self, ctx: &mut NetCtx, pkt: DataPacket) {
        self.try_send(ctx, pkt);
    }

    fn on_frame(&mut self, ctx: &mut NetCtx, frame: Frame) {
        match frame.payload {
            FramePayload::DsrRreq(rreq) => self.handle_rreq(ctx, rreq, frame.sender),
            FramePayload::DsrRrep(rrep) => self.handle_rrep(ctx, rrep, frame.sender),
            FramePayload::DsrRerr(rerr) => self.handle_rerr(ctx, rerr, frame.sender),
            FramePayload::DsrAck(ack) => self.ack_received(ctx, ack, frame.sender),
            FramePayload::Data(pkt) => self.handle_data(ctx, pkt, frame.sender),
            _ => {}
        }
    }

    /// Promiscuous route learning: cache the suffix of any overheard source
    /// route that passes through this node.
    fn on_overhear(&mut self, ctx: &mut NetCtx, frame: &Frame) {
        if !self.params.promiscuous {
            return;
        }
        let route = match &frame.payload {
            FramePayload::Data(dp) => dp.route.as_ref(),
            FramePayload::DsrRrep(rrep) => Some(&rrep.discovered),
            _ => None,
        };
        let Some(route) = route else { return };
        if let Some(pos) = route.position(self.node) {
            if pos + 1 < route.0.len() {
                self.cache_insert(route.0[pos..].to_vec(), ctx.now());
            }
        }
    }

    fn on_timer(&mut self, ctx: &mut NetCtx, kind: TimerKind) {
        match kind {
            TimerKind::DsrRreqRetry(target) => self.retry_fired(ctx, target),
            TimerKind::DsrAckTimeout { next_hop, packet } => {
                self.ack_timeout_fired(ctx, next_hop, packet)
            }
            _ => {}
        }
    }

    fn route_hops(&self, dst: NodeId, now: SimTime) -> Option<u32> {
        self.cached_route(dst, now).map(|r| r.hops() as u32)
    }

    fn cached_route(&self, dst: NodeId, now: SimTime) -> Option<SourceRoute> {
        let ttl = secs_to_micros(self.params.cache_ttl);
        self.cache.get(&dst).and_then(|entries| {
            entries
                .iter()
                .find(|e| now.saturating_sub(e.inserted_at).as_micros() <= ttl)
                .map(|e| SourceRoute(e.route.clone()))
        })
    }

    fn table_snapshot(&self) -> Vec<RouteSnapshot> {
        Vec::new()
    }
}

#[cfg(test)]
impl DsrAgent {
    pub(crate) fn cache_insert_test(&mut self, route: Vec<NodeId>, now: SimTime) {
        self.cache_insert(route, now);
    }

    pub(crate) fn cached_count(&self, dst: NodeId) -> usize {
        self.cache.get(&dst).map_or(0, Vec::len)
    }
}
