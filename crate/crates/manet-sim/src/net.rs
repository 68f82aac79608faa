//! The per-run network: event dispatch, transmission planning and
//! packet-lifecycle bookkeeping.
//!
//! One [`Network`] owns one simulation run end to end: the event queue, the
//! mobility source, the radio, one routing agent per node, the CBR flows and
//! all counters. Runs are single-threaded; parallelism only ever happens
//! across independent runs.

use std::io::Write;

use crate::agent::{AckPolicy, Protocol, RoutingAgent, TimerKind};
use crate::event::{EventHandle, EventQueue};
use crate::metrics::MetricsAccumulator;
use crate::mobility::MobilitySource;
use crate::packet::{DataPacket, DropReason, NodeId, PacketRegistry};
use crate::radio::Radio;
use crate::rng::RngStream;
use crate::time::{secs_to_micros, SimTime};
use crate::traffic::CbrFlow;
use crate::wire::{Frame, FrameKind, FramePayload};

/// Tunable protocol constants, exposed through the scenario config.
/// Defaults follow the values documented on each field.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// Hop budget for data and flooded control, hops.
    pub ttl: u32,
    /// Per-node send-buffer capacity, packets (drop-oldest).
    pub buffer_capacity: usize,
    pub dsdv: DsdvParams,
    pub aodv: AodvParams,
    pub dsr: DsrParams,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            ttl: 32,
            buffer_capacity: 64,
            dsdv: DsdvParams::default(),
            aodv: AodvParams::default(),
            dsr: DsrParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsdvParams {
    /// Periodic full-dump interval, seconds.
    pub period: f64,
    /// Uniform jitter applied to each period, +- seconds.
    pub jitter: f64,
    /// Settling delay before a triggered incremental update, seconds.
    pub settling: f64,
    /// How long a packet may wait for a route before dropping, seconds.
    pub buffer_timeout: f64,
    /// Consecutive missed periodic updates before a neighbor counts as lost.
    pub miss_threshold: u32,
}

impl Default for DsdvParams {
    fn default() -> Self {
        DsdvParams {
            period: 15.0,
            jitter: 1.0,
            settling: 5.0,
            buffer_timeout: 5.0,
            miss_threshold: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AodvParams {
    /// HELLO beacon interval, seconds.
    pub hello_interval: f64,
    /// Uniform jitter applied to each beacon, +- seconds.
    pub hello_jitter: f64,
    /// Missed HELLO intervals before a neighbor counts as lost.
    pub allowed_misses: u32,
    /// Route-discovery retry interval, seconds.
    pub rreq_retry: f64,
    /// Discovery attempts before buffered packets drop as unreachable.
    pub rreq_retries: u32,
    /// Route lifetime, seconds; refreshed on use.
    pub route_lifetime: f64,
    /// Time to detect a failed data transmission (no passive ack), seconds.
    pub ack_detect: f64,
    /// Duplicate-RREQ suppression window, seconds.
    pub seen_cache: f64,
}

impl Default for AodvParams {
    fn default() -> Self {
        AodvParams {
            hello_interval: 1.0,
            hello_jitter: 0.1,
            allowed_misses: 3,
            rreq_retry: 2.0,
            rreq_retries: 3,
            route_lifetime: 10.0,
            ack_detect: 1.0,
            seen_cache: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsrParams {
    /// Per-hop acknowledgment timeout, seconds.
    pub ack_timeout: f64,
    /// Retransmissions per hop before declaring the link dead.
    pub max_retransmits: u32,
    /// Cached routes kept per destination (shortest win).
    pub cache_capacity: usize,
    /// Cache entry lifetime, seconds.
    pub cache_ttl: f64,
    /// Whether nodes overhear source routes from passing frames.
    pub promiscuous: bool,
    /// Times one packet may be rerouted onto an alternate cached route.
    pub max_salvages: u8,
    /// Route-discovery retry interval, seconds.
    pub rreq_retry: f64,
    /// Discovery attempts before buffered packets drop as unreachable.
    pub rreq_retries: u32,
    /// Duplicate-RREQ suppression window, seconds.
    pub seen_cache: f64,
}

impl Default for DsrParams {
    fn default() -> Self {
        DsrParams {
            ack_timeout: 0.5,
            max_retransmits: 3,
            cache_capacity: 4,
            cache_ttl: 30.0,
            promiscuous: true,
            max_salvages: 3,
            rreq_retry: 2.0,
            rreq_retries: 3,
            seen_cache: 3.0,
        }
    }
}

/// Everything in a run except the agents themselves. Agents receive this
/// as their window onto the simulator.
pub struct NetCtx {
    pub(crate) queue: EventQueue<NetEvent>,
    pub mobility: MobilitySource,
    pub radio: Radio,
    pub registry: PacketRegistry,
    pub metrics: MetricsAccumulator,
    pub params: ProtocolParams,
    rng_loss: RngStream,
    rng_jitter: RngStream,
    /// Frames carrying source routes spawn overhear events.
    promiscuous: bool,
    /// Per-node activation time: trace vehicles are radio-silent before
    /// their first sample.
    first_active_us: Vec<u64>,
}

#[derive(Debug)]
pub(crate) enum NetEvent {
    Deliver { to: NodeId, frame: Frame },
    Overhear { to: NodeId, frame: Frame },
    Timer { node: NodeId, kind: TimerKind },
    SendFailed { node: NodeId, next_hop: NodeId, pkt: DataPacket },
    FlowSend { flow: usize },
}

impl NetCtx {
    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn node_count(&self) -> usize {
        self.mobility.node_count()
    }

    /// Whether `node` may transmit and receive at time `t`.
    pub fn is_active(&self, node: NodeId, t: SimTime) -> bool {
        t.as_micros() >= self.first_active_us[node.index()]
    }

    /// Uniform draw in `[base - spread, base + spread]`, clamped at zero,
    /// from the protocol-jitter stream.
    pub fn jitter_us(&mut self, base_s: f64, spread_s: f64) -> u64 {
        let lo = (base_s - spread_s).max(0.0);
        let hi = base_s + spread_s;
        secs_to_micros(self.rng_jitter.range_f64(lo, hi))
    }

    pub fn schedule_timer(&mut self, node: NodeId, delay_us: u64, kind: TimerKind) -> EventHandle {
        self.queue.schedule_in(delay_us, NetEvent::Timer { node, kind })
    }

    pub fn cancel_timer(&mut self, handle: EventHandle) -> bool {
        self.queue.cancel(handle)
    }

    /// Registers a freshly generated data packet (charged to `sent`).
    pub fn create_packet(&mut self, src: NodeId, dst: NodeId, size: u32) -> DataPacket {
        let id = self.registry.create(src, dst, size, self.now());
        self.metrics.on_sent();
        DataPacket {
            id,
            src,
            dst,
            size,
            ttl: self.params.ttl,
            route: None,
            salvage_count: 0,
            trail: vec![src],
        }
    }

    /// Final delivery at the destination. Counts once per packet id; the
    /// delivering copy's trail and header route become the packet's record.
    pub fn deliver(&mut self, node: NodeId, pkt: &DataPacket) {
        debug_assert_eq!(pkt.dst, node);
        self.registry.settle_path(pkt.id, &pkt.trail, pkt.route.as_ref());
        if self.registry.delivered(pkt.id, self.now()) {
            let latency = self.registry.latency_us(pkt.id).expect("just delivered");
            self.metrics.on_delivered(pkt.size, latency);
        }
    }

    /// Terminates a packet copy. Counts once per packet id.
    pub fn drop_data(&mut self, pkt: &DataPacket, reason: DropReason) {
        self.registry.settle_path(pkt.id, &pkt.trail, pkt.route.as_ref());
        if self.registry.dropped(pkt.id, reason) {
            self.metrics.on_drop(reason);
        }
    }

    /// Broadcasts a control frame. Charged to the control counter exactly
    /// once per transmission (even if nobody is in range).
    pub fn broadcast_control(&mut self, sender: NodeId, payload: FramePayload) {
        debug_assert_eq!(payload.kind(), FrameKind::Control);
        let now = self.now();
        if !self.is_active(sender, now) {
            return;
        }
        let frame = Frame { sender, sent_at: now, payload };
        self.metrics.on_control_tx(frame.size());
        let plan = self.radio.plan_broadcast(
            &self.mobility,
            sender,
            now,
            frame.size(),
            &mut self.rng_loss,
            |n| now.as_micros() >= self.first_active_us[n.index()],
        );
        for d in plan {
            self.queue
                .schedule(d.at, NetEvent::Deliver { to: d.to, frame: frame.clone() })
                .expect("delivery is never in the past");
        }
    }

    /// Unicasts a control frame, fire-and-forget: a loss is silent and left
    /// to higher-level timers. `overhearable` lets promiscuous neighbors
    /// cache source routes from it.
    pub fn unicast_control(
        &mut self,
        sender: NodeId,
        dst: NodeId,
        payload: FramePayload,
        overhearable: bool,
    ) {
        debug_assert_eq!(payload.kind(), FrameKind::Control);
        let now = self.now();
        if !self.is_active(sender, now) {
            return;
        }
        let frame = Frame { sender, sent_at: now, payload };
        self.metrics.on_control_tx(frame.size());
        self.plan_unicast_frame(frame, dst, overhearable);
    }

    /// Transmits a data frame to `next_hop`. Counts as a forward when the
    /// transmitting node is not the packet source. The ack policy decides
    /// what a radio loss means for the packet.
    pub fn send_data(
        &mut self,
        sender: NodeId,
        next_hop: NodeId,
        pkt: DataPacket,
        ack: AckPolicy,
        overhearable: bool,
    ) {
        let now = self.now();
        if !self.is_active(sender, now) {
            // A silent node cannot transmit; without a recovery layer the
            // packet is gone.
            if matches!(ack, AckPolicy::None) {
                self.drop_data(&pkt, DropReason::LinkLoss);
            }
            return;
        }
        if sender != pkt.src {
            self.metrics.on_forward();
        }
        let frame = Frame { sender, sent_at: now, payload: FramePayload::Data(pkt.clone()) };
        let delivered = self.plan_unicast_frame(frame, next_hop, overhearable);
        if !delivered {
            match ack {
                AckPolicy::None => self.drop_data(&pkt, DropReason::LinkLoss),
                AckPolicy::DetectFailure { after_us } => {
                    self.queue.schedule_in(
                        after_us,
                        NetEvent::SendFailed { node: sender, next_hop, pkt },
                    );
                }
                AckPolicy::ExplicitAck => {} // sender's own ack timer reacts
            }
        }
    }

    /// Plans the unicast (and overhears, if enabled); returns whether the
    /// addressed node will receive the frame.
    fn plan_unicast_frame(&mut self, frame: Frame, dst: NodeId, overhearable: bool) -> bool {
        let now = self.now();
        let size = frame.size();
        let first = &self.first_active_us;
        let active = |n: NodeId| now.as_micros() >= first[n.index()];
        let delivery = self.radio.plan_unicast(
            &self.mobility,
            frame.sender,
            dst,
            now,
            size,
            &mut self.rng_loss,
            active,
        );
        if overhearable && self.promiscuous {
            let plan = self.radio.plan_overhear(
                &self.mobility,
                frame.sender,
                dst,
                now,
                size,
                &mut self.rng_loss,
                active,
            );
            for d in plan {
                self.queue
                    .schedule(d.at, NetEvent::Overhear { to: d.to, frame: frame.clone() })
                    .expect("delivery is never in the past");
            }
        }
        match delivery {
            Some(d) => {
                self.queue
                    .schedule(d.at, NetEvent::Deliver { to: d.to, frame })
                    .expect("delivery is never in the past");
                true
            }
            None => false,
        }
    }
}

/// One complete simulation run.
pub struct Network {
    pub ctx: NetCtx,
    agents: Vec<Box<dyn RoutingAgent>>,
    flows: Vec<CbrFlow>,
    trace: Option<Box<dyn Write + Send>>,
}

impl Network {
    /// Assembles a run: one agent of `protocol` per mobility node, CBR
    /// flows scheduled at their calibrated offsets, loss and jitter streams
    /// derived from `seed`.
    pub fn new(
        protocol: Protocol,
        mobility: MobilitySource,
        radio: Radio,
        params: ProtocolParams,
        flows: Vec<CbrFlow>,
        seed: u64,
    ) -> Self {
        let n = mobility.node_count();
        let first_active_us = (0..n)
            .map(|i| mobility.first_sample_at(i).expect("node exists").as_micros())
            .collect();
        let mut ctx = NetCtx {
            queue: EventQueue::new(),
            mobility,
            radio,
            registry: PacketRegistry::new(),
            metrics: MetricsAccumulator::new(),
            params,
            rng_loss: RngStream::new(seed, "loss"),
            rng_jitter: RngStream::new(seed, "protocol-jitter"),
            promiscuous: protocol == Protocol::Dsr && params.dsr.promiscuous,
            first_active_us,
        };

        let mut agents: Vec<Box<dyn RoutingAgent>> = (0..n)
            .map(|i| -> Box<dyn RoutingAgent> {
                let node = NodeId(i as u32);
                match protocol {
                    Protocol::Aodv => Box::new(crate::aodv::AodvAgent::new(node, &params)),
                    Protocol::Dsdv => Box::new(crate::dsdv::DsdvAgent::new(node, &params)),
                    Protocol::Dsr => Box::new(crate::dsr::DsrAgent::new(node, &params)),
                }
            })
            .collect();
        for agent in &mut agents {
            agent.start(&mut ctx);
        }

        for (idx, flow) in flows.iter().enumerate() {
            ctx.queue
                .schedule(SimTime::from_micros(flow.start_us), NetEvent::FlowSend { flow: idx })
                .expect("flow start is never in the past");
        }

        Network { ctx, agents, flows, trace: None }
    }

    /// Installs an event-trace sink: one line `time_us,node,action_kind`
    /// per executed event.
    pub fn set_event_trace(&mut self, sink: Box<dyn Write + Send>) {
        self.trace = Some(sink);
    }

    pub fn agent(&self, node: NodeId) -> &dyn RoutingAgent {
        self.agents[node.index()].as_ref()
    }

    pub fn flows(&self) -> &[CbrFlow] {
        &self.flows
    }

    /// Executes every event due at or before `t`, leaving the clock at
    /// exactly `t`. Returns the number of events executed.
    pub fn run_to(&mut self, t: SimTime) -> u64 {
        let mut executed = 0;
        while let Some((at, ev)) = self.ctx.queue.pop_due(t) {
            if self.trace.is_some() {
                self.trace_line(at, &ev);
            }
            self.dispatch(ev);
            executed += 1;
        }
        self.ctx.queue.advance_to(t);
        executed
    }

    fn trace_line(&mut self, at: SimTime, ev: &NetEvent) {
        let (node, kind) = match ev {
            NetEvent::Deliver { to, frame } => (*to, format!("rx:{}", frame.payload.label())),
            NetEvent::Overhear { to, frame } => {
                (*to, format!("overhear:{}", frame.payload.label()))
            }
            NetEvent::Timer { node, kind } => (*node, format!("timer:{}", kind.label())),
            NetEvent::SendFailed { node, .. } => (*node, "send-failed".to_string()),
            NetEvent::FlowSend { flow } => (self.flows[*flow].src, "flow-send".to_string()),
        };
        if let Some(sink) = self.trace.as_mut() {
            let _ = writeln!(sink, "{},{},{}", at.as_micros(), node.0, kind);
        }
    }

    fn dispatch(&mut self, ev: NetEvent) {
        match ev {
            NetEvent::Deliver { to, frame } => {
                self.agents[to.index()].on_frame(&mut self.ctx, frame);
            }
            NetEvent::Overhear { to, frame } => {
                self.agents[to.index()].on_overhear(&mut self.ctx, &frame);
            }
            NetEvent::Timer { node, kind } => {
                self.agents[node.index()].on_timer(&mut self.ctx, kind);
            }
            NetEvent::SendFailed { node, next_hop, pkt } => {
                self.agents[node.index()].on_send_failed(&mut self.ctx, next_hop, pkt);
            }
            NetEvent::FlowSend { flow } => self.generate(flow),
        }
    }

    fn generate(&mut self, flow_idx: usize) {
        let flow = self.flows[flow_idx];
        let pkt = self.ctx.create_packet(flow.src, flow.dst, flow.packet_size);
        self.agents[flow.src.index()].on_data(&mut self.ctx, pkt);
        let next = self.ctx.now() + flow.interval_us;
        if next.as_micros() <= flow.stop_us {
            self.ctx
                .queue
                .schedule(next, NetEvent::FlowSend { flow: flow_idx })
                .expect("next send is in the future");
        }
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::mobility::Position;

    /// A bare context over `n` static nodes placed in a mutual-range line,
    /// for driving agents directly in unit tests.
    pub(crate) fn ctx_with_static_nodes(n: usize, protocol: Protocol) -> NetCtx {
        let positions: Vec<Position> =
            (0..n).map(|i| Position { x: i as f64 * 10.0, y: 0.0 }).collect();
        let mobility = MobilitySource::fixed(&positions).unwrap();
        let params = ProtocolParams::default();
        NetCtx {
            queue: EventQueue::new(),
            first_active_us: vec![0; mobility.node_count()],
            mobility,
            radio: Radio::new(crate::radio::ChannelConfig::default()),
            registry: PacketRegistry::new(),
            metrics: MetricsAccumulator::new(),
            params,
            rng_loss: RngStream::new(0, "loss"),
            rng_jitter: RngStream::new(0, "protocol-jitter"),
            promiscuous: protocol == Protocol::Dsr,
        }
    }
}
