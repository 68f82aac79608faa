//! Deterministic discrete-event simulation of mobile ad-hoc routing.
//!
//! This crate implements and compares three classic ad-hoc routing
//! protocols — AODV and DSR (reactive) and DSDV (proactive) — over mobile
//! nodes on a simplified unit-disk radio. Scenarios are fully reproducible:
//! the same configuration and seed always produce byte-identical results.
//!
//! The building blocks compose bottom-up:
//!
//! * [`event`] — the simulated clock and `(time, insertion-order)` event queue.
//! * [`rng`] — labelled per-purpose random streams derived from one seed.
//! * [`mobility`] — random-waypoint motion or SUMO floating-car-data traces
//!   ([`fcd`]), answering "where is node i at time t".
//! * [`radio`] — unit-disk connectivity, serialization delay, independent
//!   per-receiver loss.
//! * [`aodv`], [`dsdv`], [`dsr`] — the protocol agents behind one
//!   [`agent::RoutingAgent`] contract.
//! * [`traffic`] / [`metrics`] — calibrated constant-bit-rate flows and the
//!   four comparison metrics (both delivery-ratio conventions, throughput,
//!   mean end-to-end delay, normalized routing load).
//! * [`scenario`] / [`report`] — configuration, sweep orchestration and
//!   CSV/series/summary emission.
//!
//! ```
//! use manet_sim::scenario::{ScenarioConfig, run_scenario};
//!
//! let mut cfg = ScenarioConfig::default();
//! cfg.n_nodes = 20;
//! cfg.duration = 30.0;
//! cfg.traffic.flows = 4;
//! let result = run_scenario(&cfg).unwrap();
//! assert_eq!(result.sent, run_scenario(&cfg).unwrap().sent);
//! ```

pub mod agent;
pub mod aodv;
pub mod dsdv;
pub mod dsr;
pub mod event;
pub mod fcd;
pub mod metrics;
pub mod mobility;
pub mod net;
pub mod packet;
pub mod radio;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod time;
pub mod traffic;
pub mod wire;

pub use agent::{Protocol, RoutingAgent};
pub use event::{EventHandle, EventQueue, ScheduleError};
pub use metrics::{avg_e2e_delay, nrl, paper_pdr, pdr, throughput, MetricsAccumulator};
pub use mobility::{MobilitySource, Position, Waypoint};
pub use net::{Network, ProtocolParams};
pub use packet::{DataPacket, DropReason, NodeId, PacketId, SourceRoute};
pub use radio::{ChannelConfig, Radio};
pub use rng::RngStream;
pub use scenario::{run_scenario, sweep, RunResult, ScenarioConfig};
pub use time::SimTime;

// The book's code listings double as doc-tests so the narrative can never
// drift from the API. See book/src/*.md.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(event_engine, "../../../book/src/event-engine.md");
    chapter!(mobility, "../../../book/src/mobility.md");
    chapter!(radio, "../../../book/src/radio.md");
    chapter!(dsdv, "../../../book/src/dsdv.md");
    chapter!(aodv, "../../../book/src/aodv.md");
    chapter!(dsr, "../../../book/src/dsr.md");
    chapter!(metrics, "../../../book/src/metrics.md");
    chapter!(harness, "../../../book/src/harness.md");
}
