//! Destination-sequenced distance-vector routing (proactive).
//!
//! Every node keeps one table row per known destination: next hop, hop
//! count, and the destination-issued sequence number that distinguishes
//! stale routes from fresh ones. Nodes broadcast their full table
//! periodically (bumping their own sequence number by two, so it stays
//! even) and send event-driven incremental updates after a settling delay.
//! A neighbor that misses several consecutive periodic updates is declared
//! lost: routes through it get an infinite metric and an odd sequence
//! number, which propagates until the destination's next even update heals
//! the route. Newer sequence numbers always win; ties go to fewer hops —
//! the rule that keeps the next-hop graph loop-free.

use std::collections::{BTreeMap, BTreeSet};

use crate::agent::{AckPolicy, Protocol, RouteSnapshot, RoutingAgent, SendBuffer, TimerKind};
use crate::net::{DsdvParams, NetCtx};
use crate::packet::{DataPacket, DropReason, NodeId, SourceRoute};
use crate::time::{secs_to_micros, SimTime};
use crate::wire::{DsdvAdvert, DsdvUpdate, DsdvUpdateKind, Frame, FramePayload};

/// Hop metric marking a broken route.
pub const INFINITE_HOPS: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Entry {
    next_hop: NodeId,
    hops: u32,
    seq: u64,
    installed_at: SimTime,
}

impl Entry {
    fn usable(&self) -> bool {
        self.hops != INFINITE_HOPS
    }
}

pub struct DsdvAgent {
    node: NodeId,
    params: DsdvParams,
    table: BTreeMap<NodeId, Entry>,
    own_seq: u64,
    /// Destinations whose routes changed since the last advertisement.
    changed: BTreeSet<NodeId>,
    settling_armed: bool,
    buffer: SendBuffer,
    /// Last time a routing update was heard from each neighbor.
    last_heard: BTreeMap<NodeId, SimTime>,
}

impl DsdvAgent {
    pub fn new(node: NodeId, params: &crate::net::ProtocolParams) -> Self {
        let mut table = BTreeMap::new();
        table.insert(
            node,
            Entry { next_hop: node, hops: 0, seq: 0, installed_at: SimTime::ZERO },
        );
        DsdvAgent {
            node,
            params: params.dsdv,
            table,
            own_seq: 0,
            changed: BTreeSet::new(),
            settling_armed: false,
            buffer: SendBuffer::new(params.buffer_capacity),
            last_heard: BTreeMap::new(),
        }
    }

    fn usable_route(&self, dst: NodeId) -> Option<Entry> {
        self.table.get(&dst).copied().filter(Entry::usable)
    }

    fn adverts(&self, dsts: impl Iterator<Item = NodeId>) -> Vec<DsdvAdvert> {
        dsts.filter_map(|dst| {
            self.table
                .get(&dst)
                .map(|e| DsdvAdvert { dst, hops: e.hops, seq: e.seq })
        })
        .collect()
    }

    fn broadcast_full_dump(&mut self, ctx: &mut NetCtx) {
        let entries = self.adverts(self.table.keys().copied().collect::<Vec<_>>().into_iter());
        ctx.broadcast_control(
            self.node,
            FramePayload::DsdvUpdate(DsdvUpdate { kind: DsdvUpdateKind::FullDump, entries }),
        );
        // A full dump advertises everything, so nothing is left pending.
        self.changed.clear();
    }

    fn broadcast_incremental(&mut self, ctx: &mut NetCtx, dsts: Vec<NodeId>) {
        if dsts.is_empty() {
            return;
        }
        let entries = self.adverts(dsts.into_iter());
        ctx.broadcast_control(
            self.node,
            FramePayload::DsdvUpdate(DsdvUpdate { kind: DsdvUpdateKind::Incremental, entries }),
        );
    }

    fn periodic_update(&mut self, ctx: &mut NetCtx) {
        self.own_seq += 2;
        let now = ctx.now();
        if let Some(e) = self.table.get_mut(&self.node) {
            e.seq = self.own_seq;
            e.installed_at = now;
        }
        self.scan_for_lost_neighbors(ctx);
        self.broadcast_full_dump(ctx);
        let delay = ctx.jitter_us(self.params.period, self.params.jitter);
        ctx.schedule_timer(self.node, delay, TimerKind::DsdvPeriodic);
    }

    /// A neighbor counts as lost after missing `miss_threshold` consecutive
    /// periodic updates (jitter included in the allowance).
    fn scan_for_lost_neighbors(&mut self, ctx: &mut NetCtx) {
        let now = ctx.now();
        let window =
            secs_to_micros((self.params.period + self.params.jitter) * self.params.miss_threshold as f64);
        let lost: Vec<NodeId> = self
            .last_heard
            .iter()
            .filter(|(_, at)| now.saturating_sub(**at).as_micros() > window)
            .map(|(n, _)| *n)
            .collect();
        for neighbor in lost {
            self.last_heard.remove(&neighbor);
            self.handle_link_break(ctx, neighbor);
        }
    }

    /// Marks every route through `lost` broken: infinite metric, sequence
    /// bumped to odd. Broadcast immediately (event-driven update).
    fn handle_link_break(&mut self, ctx: &mut NetCtx, lost: NodeId) {
        let mut broken = Vec::new();
        for (dst, e) in self.table.iter_mut() {
            if *dst != self.node && e.next_hop == lost && e.usable() {
                e.hops = INFINITE_HOPS;
                e.seq += 1; // odd: broken by a neighbor, not by the destination
                e.installed_at = ctx.now();
                broken.push(*dst);
            }
        }
        for dst in &broken {
            self.changed.remove(dst);
        }
        self.broadcast_incremental(ctx, broken);
    }

    /// Applies one received update.
    ///
    /// Adoption rule: a newer sequence number wins outright when the
    /// candidate path is no longer than the current one, when it comes from
    /// the current next hop (our own path changed length), or when the
    /// current route is broken. A fresher-but-longer path via some *other*
    /// neighbor is deferred instead — the same freshness arrives along the
    /// current (shorter) path within an update period, and adopting early
    /// would make hop counts flutter above their true distances. At equal
    /// sequence numbers a strictly shorter path wins. Table sequence
    /// numbers never decrease and equal-sequence hop counts never increase,
    /// which keeps the per-destination next-hop graph acyclic. A next hop
    /// that stops being useful without advertising so is caught by the
    /// missed-update scan, which breaks its routes and reopens adoption.
    fn merge_update(&mut self, ctx: &mut NetCtx, update: &DsdvUpdate, from: NodeId) {
        self.last_heard.insert(from, ctx.now());
        let mut route_changed = false;
        for advert in &update.entries {
            if advert.dst == self.node {
                // An advertisement about ourselves can never be fresher than
                // our own sequence number; ignore it.
                continue;
            }
            let cand_hops =
                if advert.hops == INFINITE_HOPS { INFINITE_HOPS } else { advert.hops + 1 };
            let adopt = match self.table.get(&advert.dst) {
                None => true,
                Some(e) if advert.seq > e.seq => {
                    cand_hops <= e.hops || e.next_hop == from || !e.usable()
                }
                Some(e) => advert.seq == e.seq && cand_hops < e.hops,
            };
            if !adopt {
                continue;
            }
            let prev = self.table.get(&advert.dst).copied();
            let significant = match prev {
                None => true,
                Some(p) => p.next_hop != from || p.hops != cand_hops,
            };
            self.table.insert(
                advert.dst,
                Entry { next_hop: from, hops: cand_hops, seq: advert.seq, installed_at: ctx.now() },
            );
            if significant {
                self.changed.insert(advert.dst);
                route_changed = true;
            }
        }
        if route_changed {
            self.flush_routable(ctx);
            if !self.changed.is_empty() && !self.settling_armed {
                self.settling_armed = true;
                let delay = secs_to_micros(self.params.settling);
                ctx.schedule_timer(self.node, delay, TimerKind::DsdvSettling);
            }
        }
    }

    fn settling_fired(&mut self, ctx: &mut NetCtx) {
        self.settling_armed = false;
        let dsts: Vec<NodeId> = self.changed.iter().copied().collect();
        self.changed.clear();
        self.broadcast_incremental(ctx, dsts);
    }

    /// Sends buffered packets whose destination became routable.
    fn flush_routable(&mut self, ctx: &mut NetCtx) {
        for dst in self.buffer.pending_destinations() {
            if self.usable_route(dst).is_some() {
                for pkt in self.buffer.take_for(dst) {
                    self.forward_data(ctx, pkt);
                }
            }
        }
    }

    /// Forwards via the table, or buffers the packet while no valid route
    /// exists. Buffered packets expire after the configured timeout.
    fn forward_data(&mut self, ctx: &mut NetCtx, mut pkt: DataPacket) {
        if pkt.dst == self.node {
            ctx.deliver(self.node, &pkt);
            return;
        }
        match self.usable_route(pkt.dst) {
            Some(e) => {
                if pkt.ttl == 0 {
                    ctx.drop_data(&pkt, DropReason::Ttl);
                    return;
                }
                pkt.ttl -= 1;
                ctx.send_data(self.node, e.next_hop, pkt, AckPolicy::None, false);
            }
            None => {
                let id = pkt.id;
                if let Some(evicted) = self.buffer.push(pkt, ctx.now()) {
                    ctx.drop_data(&evicted, DropReason::NoRoute);
                }
                let delay = secs_to_micros(self.params.buffer_timeout);
                ctx.schedule_timer(self.node, delay, TimerKind::DsdvBufferTimeout(id));
            }
        }
    }
}

impl RoutingAgent for DsdvAgent {
    fn protocol(&self) -> Protocol {
        Protocol::Dsdv
    }

    fn start(&mut self, ctx: &mut NetCtx) {
        // First dump lands within the first second; later dumps follow the
        // jittered period so nodes stay desynchronized.
        let first = ctx.jitter_us(0.5, 0.5);
        ctx.schedule_timer(self.node, first, TimerKind::DsdvPeriodic);
    }

    fn on_data(&mut self, ctx: &mut NetCtx, pkt: DataPacket) {
        self.forward_data(ctx, pkt);
    }

    fn on_frame(&mut self, ctx: &mut NetCtx, frame: Frame) {
        match frame.payload {
            FramePayload::DsdvUpdate(ref update) => self.merge_update(ctx, update, frame.sender),
            FramePayload::Data(mut pkt) => {
                pkt.trail.push(self.node);
                self.forward_data(ctx, pkt);
            }
            _ => {}
        }
    }

    fn on_timer(&mut self, ctx: &mut NetCtx, kind: TimerKind) {
        match kind {
            TimerKind::DsdvPeriodic => self.periodic_update(ctx),
            TimerKind::DsdvSettling => self.settling_fired(ctx),
            TimerKind::DsdvBufferTimeout(id) => {
                if let Some(pkt) = self.buffer.remove(id) {
                    ctx.drop_data(&pkt, DropReason::NoRoute);
                }
            }
            _ => {}
        }
    }

    fn route_hops(&self, dst: NodeId, _now: SimTime) -> Option<u32> {
        self.usable_route(dst).map(|e| e.hops)
    }

    fn table_snapshot(&self) -> Vec<RouteSnapshot> {
        self.table
            .iter()
            .filter(|(dst, e)| **dst != self.node && e.usable())
            .map(|(dst, e)| RouteSnapshot {
                dst: *dst,
                next_hop: e.next_hop,
                hops: e.hops,
                seq: e.seq,
            })
            .collect()
    }

    fn cached_route(&self, _dst: NodeId, _now: SimTime) -> Option<SourceRoute> {
        None
    }
}

/// Test access to protocol internals.
#[cfg(test)]
impl DsdvAgent {
    pub(crate) fn own_seq(&self) -> u64 {
        self.own_seq
    }

    pub(crate) fn entry_for(&self, dst: NodeId) -> Option<(NodeId, u32, u64)> {
        self.table.get(&dst).map(|e| (e.next_hop, e.hops, e.seq))
    }
}
