//! Ad-hoc on-demand distance-vector routing (reactive, hop-by-hop).
//!
//! A node needing a route floods a route request; every node the flood
//! crosses installs a reverse route back to the origin. The destination
//! (or an intermediate holding a route at least as fresh as requested)
//! unicasts a route reply along that reverse path, and every forwarder of
//! the reply installs the forward route — so state is hop-by-hop, never a
//! full path. HELLO beacons keep neighbor liveness; a broken next hop
//! invalidates its routes and triggers a route-error broadcast that
//! upstream nodes propagate. Routes expire unless refreshed by use.

use std::collections::{BTreeMap, HashMap};

use crate::agent::{AckPolicy, Protocol, RouteSnapshot, RoutingAgent, SendBuffer, TimerKind};
use crate::event::EventHandle;
use crate::net::{AodvParams, NetCtx};
use crate::packet::{DataPacket, DropReason, NodeId, SourceRoute};
use crate::time::{secs_to_micros, SimTime};
use crate::wire::{AodvRerr, AodvRrep, AodvRreq, Frame, FramePayload};

#[derive(Debug, Clone, Copy)]
struct Entry {
    next_hop: NodeId,
    hops: u32,
    dst_seq: u64,
    valid: bool,
    expires_at: SimTime,
}

impl Entry {
    fn usable(&self, now: SimTime) -> bool {
        self.valid && self.expires_at > now
    }
}

#[derive(Debug)]
struct PendingDiscovery {
    attempts: u32,
    retry_timer: EventHandle,
}

pub struct AodvAgent {
    node: NodeId,
    params: AodvParams,
    own_seq: u64,
    rreq_seq: u64,
    table: BTreeMap<NodeId, Entry>,
    pending: BTreeMap<NodeId, PendingDiscovery>,
    buffer: SendBuffer,
    /// Duplicate-RREQ suppression: (origin, rreq id) -> first seen.
    seen: HashMap<(NodeId, u64), SimTime>,
    /// Last frame of any kind heard from each neighbor.
    last_heard: BTreeMap<NodeId, SimTime>,
}

impl AodvAgent {
    pub fn new(node: NodeId, params: &crate::net::ProtocolParams) -> Self {
        AodvAgent {
            node,
            params: params.aodv,
            own_seq: 0,
            rreq_seq: 0,
            table: BTreeMap::new(),
            pending: BTreeMap::new(),
            buffer: SendBuffer::new(params.buffer_capacity),
            seen: HashMap::new(),
            last_heard: BTreeMap::new(),
        }
    }

    fn usable_route(&self, dst: NodeId, now: SimTime) -> Option<Entry> {
        self.table.get(&dst).copied().filter(|e| e.usable(now))
    }

    /// Standard adoption rule: newer destination sequence wins; at equal
    /// sequence a route is replaced if the current one is unusable or the
    /// candidate is shorter.
    fn update_route(&mut self, dst: NodeId, next_hop: NodeId, hops: u32, seq: u64, now: SimTime) {
        if dst == self.node {
            return;
        }
        let lifetime = secs_to_micros(self.params.route_lifetime);
        let adopt = match self.table.get(&dst) {
            None => true,
            Some(e) => seq > e.dst_seq || (seq == e.dst_seq && (!e.usable(now) || hops < e.hops)),
        };
        if adopt {
            self.table.insert(
                dst,
                Entry { next_hop, hops, dst_seq: seq, valid: true, expires_at: now + lifetime },
            );
        }
    }

    fn refresh(&mut self, dst: NodeId, now: SimTime) {
        let lifetime = secs_to_micros(self.params.route_lifetime);
        if let Some(e) = self.table.get_mut(&dst) {
            e.expires_at = now + lifetime;
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

    fn originate_rreq(&mut self, ctx: &mut NetCtx, dst: NodeId, attempts: u32) {
        self.own_seq += 1;
        self.rreq_seq += 1;
        self.seen.insert((self.node, self.rreq_seq), ctx.now());
        let rreq = AodvRreq {
            origin: self.node,
            rreq_seq: self.rreq_seq,
            origin_seq: self.own_seq,
            dst,
            dst_seq_known: self.table.get(&dst).map(|e| e.dst_seq),
            hop_count: 0,
            ttl: ctx.params.ttl,
        };
        ctx.broadcast_control(self.node, FramePayload::AodvRreq(rreq));
        let retry_timer = ctx.schedule_timer(
            self.node,
            secs_to_micros(self.params.rreq_retry),
            TimerKind::AodvRreqRetry(dst),
        );
        self.pending.insert(dst, PendingDiscovery { attempts, retry_timer });
    }

    fn retry_fired(&mut self, ctx: &mut NetCtx, dst: NodeId) {
        let Some(p) = self.pending.remove(&dst) else { return };
        if self.usable_route(dst, ctx.now()).is_some() {
            return; // a reply raced the timer
        }
        if p.attempts >= self.params.rreq_retries {
            for pkt in self.buffer.take_for(dst) {
                ctx.drop_data(&pkt, DropReason::Unreachable);
            }
        } else {
            self.originate_rreq(ctx, dst, p.attempts + 1);
        }
    }

    fn buffer_and_discover(&mut self, ctx: &mut NetCtx, pkt: DataPacket) {
        let dst = pkt.dst;
        if let Some(evicted) = self.buffer.push(pkt, ctx.now()) {
            ctx.drop_data(&evicted, DropReason::NoRoute);
        }
        if !self.pending.contains_key(&dst) {
            self.originate_rreq(ctx, dst, 1);
        }
    }

    fn forward_data(&mut self, ctx: &mut NetCtx, mut pkt: DataPacket) {
        if pkt.dst == self.node {
            ctx.deliver(self.node, &pkt);
            return;
        }
        match self.usable_route(pkt.dst, ctx.now()) {
            Some(e) => {
                if pkt.ttl == 0 {
                    ctx.drop_data(&pkt, DropReason::Ttl);
                    return;
                }
                pkt.ttl -= 1;
                self.refresh(pkt.dst, ctx.now());
                self.refresh(e.next_hop, ctx.now());
                let detect = secs_to_micros(self.params.ack_detect);
                ctx.send_data(
                    self.node,
                    e.next_hop,
                    pkt,
                    AckPolicy::DetectFailure { after_us: detect },
                    false,
                );
            }
            None if pkt.src == self.node => self.buffer_and_discover(ctx, pkt),
            None => {
                // Intermediate node without a route: report upstream and
                // let sources rediscover on demand.
                let seq = self.table.get(&pkt.dst).map(|e| e.dst_seq + 1).unwrap_or(0);
                ctx.drop_data(&pkt, DropReason::NoRoute);
                ctx.broadcast_control(
                    self.node,
                    FramePayload::AodvRerr(AodvRerr { unreachable: vec![(pkt.dst, seq)] }),
                );
            }
        }
    }

    /// Sends every buffered packet whose destination became routable and
    /// clears discoveries that are now satisfied.
    fn flush_routable(&mut self, ctx: &mut NetCtx) {
        let now = ctx.now();
        for dst in self.buffer.pending_destinations() {
            if self.usable_route(dst, now).is_some() {
                for pkt in self.buffer.take_for(dst) {
                    self.forward_data(ctx, pkt);
                }
            }
        }
        let satisfied: Vec<NodeId> = self
            .pending
            .keys()
            .copied()
            .filter(|d| self.usable_route(*d, now).is_some())
            .collect();
        for dst in satisfied {
            if let Some(p) = self.pending.remove(&dst) {
                ctx.cancel_timer(p.retry_timer);
            }
        }
    }

    fn handle_rreq(&mut self, ctx: &mut NetCtx, rreq: AodvRreq, from: NodeId) {
        let now = ctx.now();
        if rreq.origin == self.node || self.seen_before((rreq.origin, rreq.rreq_seq), now) {
            return;
        }
        // Reverse route toward the origin via the node we heard this from.
        self.update_route(rreq.origin, from, rreq.hop_count + 1, rreq.origin_seq, now);
        self.flush_routable(ctx);

        if rreq.dst == self.node {
            self.own_seq = self.own_seq.max(rreq.dst_seq_known.unwrap_or(0));
            let rrep = AodvRrep {
                origin: rreq.origin,
                dst: self.node,
                dst_seq: self.own_seq,
                hop_count: 0,
            };
            ctx.unicast_control(self.node, from, FramePayload::AodvRrep(rrep), false);
            return;
        }
        // An intermediate may answer from its table when its route is at
        // least as fresh as the origin requested.
        if let Some(e) = self.usable_route(rreq.dst, now) {
            if e.dst_seq >= rreq.dst_seq_known.unwrap_or(0) {
                let rrep = AodvRrep {
                    origin: rreq.origin,
                    dst: rreq.dst,
                    dst_seq: e.dst_seq,
                    hop_count: e.hops,
                };
                ctx.unicast_control(self.node, from, FramePayload::AodvRrep(rrep), false);
                return;
            }
        }
        if rreq.ttl > 1 {
            let fwd = AodvRreq { hop_count: rreq.hop_count + 1, ttl: rreq.ttl - 1, ..rreq };
            ctx.broadcast_control(self.node, FramePayload::AodvRreq(fwd));
        }
    }

    fn handle_rrep(&mut self, ctx: &mut NetCtx, rrep: AodvRrep, from: NodeId) {
        let now = ctx.now();
        self.update_route(rrep.dst, from, rrep.hop_count + 1, rrep.dst_seq, now);
        self.flush_routable(ctx);
        if rrep.origin == self.node {
            return;
        }
        // Not for us: forward along the reverse route installed by the RREQ.
        let Some(reverse) = self.usable_route(rrep.origin, now) else {
            return; // reverse route evaporated; the origin's retry recovers
        };
        self.refresh(rrep.origin, now);
        let fwd = AodvRrep { hop_count: rrep.hop_count + 1, ..rrep };
        ctx.unicast_control(self.node, reverse.next_hop, FramePayload::AodvRrep(fwd), false);
    }

    /// Invalidates every route through `lost` and broadcasts the losses.
    fn handle_broken_link(&mut self, ctx: &mut NetCtx, lost: NodeId) {
        self.last_heard.remove(&lost);
        let mut unreachable = Vec::new();
        for (dst, e) in self.table.iter_mut() {
            if e.valid && e.next_hop == lost {
                e.valid = false;
                e.dst_seq += 1;
                unreachable.push((*dst, e.dst_seq));
            }
        }
        if !unreachable.is_empty() {
            ctx.broadcast_control(self.node, FramePayload::AodvRerr(AodvRerr { unreachable }));
        }
    }

    fn handle_rerr(&mut self, ctx: &mut NetCtx, rerr: &AodvRerr, from: NodeId) {
        let mut propagated = Vec::new();
        for (dst, seq) in &rerr.unreachable {
            if let Some(e) = self.table.get_mut(dst) {
                if e.valid && e.next_hop == from {
                    e.valid = false;
                    e.dst_seq = e.dst_seq.max(*seq);
                    propagated.push((*dst, e.dst_seq));
                }
            }
        }
        if !propagated.is_empty() {
            ctx.broadcast_control(
                self.node,
                FramePayload::AodvRerr(AodvRerr { unreachable: propagated }),
            );
        }
    }

    fn hello_tick(&mut self, ctx: &mut NetCtx) {
        ctx.broadcast_control(self.node, FramePayload::AodvHello);
        // Neighbor liveness: a next hop silent for `allowed_misses` beacon
        // intervals (jitter included) has gone away.
        let now = ctx.now();
        let window = secs_to_micros(
            (self.params.hello_interval + self.params.hello_jitter)
                * self.params.allowed_misses as f64,
        );
        let lost: Vec<NodeId> = self
            .last_heard
            .iter()
            .filter(|(_, at)| now.saturating_sub(**at).as_micros() > window)
            .map(|(n, _)| *n)
            .collect();
        for neighbor in lost {
            self.handle_broken_link(ctx, neighbor);
        }
        let delay = ctx.jitter_us(self.params.hello_interval, self.params.hello_jitter);
        ctx.schedule_timer(self.node, delay, TimerKind::AodvHello);
    }
}

impl RoutingAgent for AodvAgent {
    fn protocol(&self) -> Protocol {
        Protocol::Aodv
    }

    fn start(&mut self, ctx: &mut NetCtx) {
        let first = ctx.jitter_us(0.5, 0.5);
        ctx.schedule_timer(self.node, first, TimerKind::AodvHello);
    }

    fn on_data(&mut self, ctx: &mut NetCtx, pkt: DataPacket) {
        self.forward_data(ctx, pkt);
    }

    fn on_frame(&mut self, ctx: &mut NetCtx, frame: Frame) {
        self.last_heard.insert(frame.sender, ctx.now());
        match frame.payload {
            FramePayload::AodvRreq(rreq) => self.handle_rreq(ctx, rreq, frame.sender),
            FramePayload::AodvRrep(rrep) => self.handle_rrep(ctx, rrep, frame.sender),
            FramePayload::AodvRerr(ref rerr) => self.handle_rerr(ctx, rerr, frame.sender),
            FramePayload::AodvHello => {}
            FramePayload::Data(mut pkt) => {
                pkt.trail.push(self.node);
                self.forward_data(ctx, pkt);
            }
            _ => {}
        }
    }

    fn on_timer(&mut self, ctx: &mut NetCtx, kind: TimerKind) {
        match kind {
            TimerKind::AodvHello => self.hello_tick(ctx),
            TimerKind::AodvRreqRetry(dst) => self.retry_fired(ctx, dst),
            _ => {}
        }
    }

    fn on_send_failed(&mut self, ctx: &mut NetCtx, next_hop: NodeId, pkt: DataPacket) {
        self.handle_broken_link(ctx, next_hop);
        if pkt.src == self.node {
            // The origin buffers the packet again and rediscovers.
            match self.usable_route(pkt.dst, ctx.now()) {
                Some(_) => self.forward_data(ctx, pkt),
                None => self.buffer_and_discover(ctx, pkt),
            }
        } else {
            ctx.drop_data(&pkt, DropReason::LinkLoss);
        }
    }

    fn route_hops(&self, dst: NodeId, now: SimTime) -> Option<u32> {
        self.usable_route(dst, now).map(|e| e.hops)
    }

    fn table_snapshot(&self) -> Vec<RouteSnapshot> {
        self.table
            .iter()
            .filter(|(_, e)| e.valid)
            .map(|(dst, e)| RouteSnapshot {
                dst: *dst,
                next_hop: e.next_hop,
                hops: e.hops,
                seq: e.dst_seq,
            })
            .collect()
    }

    fn cached_route(&self, _dst: NodeId, _now: SimTime) -> Option<SourceRoute> {
        None
    }
}

#[cfg(test)]
impl AodvAgent {
    pub(crate) fn entry_for(&self, dst: NodeId) -> Option<(NodeId, u32, u64, bool)> {
        self.table.get(&dst).map(|e| (e.next_hop, e.hops, e.dst_seq, e.valid))
    }
}
