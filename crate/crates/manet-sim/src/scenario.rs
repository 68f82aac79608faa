//! Scenario configuration and sweep orchestration.
//!
//! A [`ScenarioConfig`] pins everything a run depends on: protocol, node
//! count, arena, duration, seed, mobility, channel, traffic and protocol
//! parameters. Identical configs produce identical [`RunResult`]s, so sweeps
//! can safely run in a parallel worker pool — runs share no mutable state.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Protocol;
use crate::metrics;
use crate::mobility::{MobilityError, MobilitySource};
use crate::net::{Network, ProtocolParams};

use crate::radio::{ChannelConfig, Radio};
use crate::rng::RngStream;
use crate::time::SimTime;
use crate::traffic::{spawn_flows, TrafficConfig, TrafficError};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MobilityConfig {
    /// Random waypoint inside the arena.
    Rwp {
        #[serde(default = "default_speed_min")]
        speed_min: f64,
        #[serde(default = "default_speed_max")]
        speed_max: f64,
        #[serde(default)]
        pause: f64,
    },
    /// SUMO floating-car-data trace; the trace defines the node set.
    Trace { path: PathBuf },
}

fn default_speed_min() -> f64 {
    5.0
}
fn default_speed_max() -> f64 {
    15.0
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig::Rwp { speed_min: 5.0, speed_max: 15.0, pause: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub protocol: Protocol,
    pub n_nodes: u32,
    /// Arena width and height in meters.
    pub arena: [f64; 2],
    /// Simulated duration, seconds.
    pub duration: f64,
    pub seed: u64,
    pub mobility: MobilityConfig,
    pub channel: ChannelConfig,
    pub traffic: TrafficConfig,
    pub params: ProtocolParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            protocol: Protocol::Aodv,
            n_nodes: 100,
            arena: [867.0, 561.0],
            duration: 100.0,
            seed: 1,
            mobility: MobilityConfig::default(),
            channel: ChannelConfig::default(),
            traffic: TrafficConfig::default(),
            params: ProtocolParams::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error("trace file {path}: {source}")]
    Trace {
        path: PathBuf,
        #[source]
        source: crate::fcd::FcdError,
    },
    #[error("sweep aborted at ({protocol}, {sim_time}s, seed {seed}) after {completed} completed runs: {source}")]
    SweepRun {
        protocol: Protocol,
        sim_time: f64,
        seed: u64,
        completed: usize,
        #[source]
        source: Box<ScenarioError>,
    },
}

impl ScenarioConfig {
    /// Validates everything checkable before the simulation starts.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.duration.is_finite() || self.duration <= 0.0 {
            return Err(ScenarioError::Invalid(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if self.n_nodes == 0 {
            return Err(ScenarioError::Invalid("need at least one node".into()));
        }
        self.channel.validate().map_err(ScenarioError::Invalid)?;
        match &self.mobility {
            MobilityConfig::Rwp { speed_min, speed_max, pause } => {
                if !(self.arena[0] > 0.0 && self.arena[1] > 0.0) {
                    return Err(ScenarioError::Invalid(format!(
                        "arena must have positive area, got {}x{}",
                        self.arena[0], self.arena[1]
                    )));
                }
                if speed_min > speed_max || *speed_min < 0.0 {
                    return Err(ScenarioError::Invalid(format!(
                        "speed range invalid: {speed_min}..{speed_max}"
                    )));
                }
                if *pause < 0.0 {
                    return Err(ScenarioError::Invalid("pause must be nonnegative".into()));
                }
            }
            MobilityConfig::Trace { path } => {
                if !path.exists() {
                    return Err(ScenarioError::Invalid(format!(
                        "trace file does not exist: {}",
                        path.display()
                    )));
                }
            }
        }
        Ok(())
    }

    fn build_mobility(&self) -> Result<MobilitySource, ScenarioError> {
        match &self.mobility {
            MobilityConfig::Rwp { speed_min, speed_max, pause } => {
                let mut rng = RngStream::new(self.seed, "mobility");
                Ok(MobilitySource::random_waypoint(
                    self.n_nodes as usize,
                    (self.arena[0], self.arena[1]),
                    *speed_min,
                    *speed_max,
                    *pause,
                    self.duration,
                    &mut rng,
                )?)
            }
            MobilityConfig::Trace { path } => {
                let file = std::fs::File::open(path).map_err(|e| ScenarioError::Trace {
                    path: path.clone(),
                    source: crate::fcd::FcdError::Io(e),
                })?;
                crate::fcd::load_fcd(std::io::BufReader::new(file))
                    .map_err(|source| ScenarioError::Trace { path: path.clone(), source })
            }
        }
    }

    /// Assembles the network for this scenario without running it. Useful
    /// when the caller wants to step the clock and inspect agents.
    pub fn build_network(&self) -> Result<Network, ScenarioError> {
        self.validate()?;
        let mobility = self.build_mobility()?;
        // A trace defines its own node set.
        let n_nodes = mobility.node_count();
        let mut rng_traffic = RngStream::new(self.seed, "traffic");
        let flows = spawn_flows(&self.traffic, n_nodes, self.duration, &mut rng_traffic)?;
        Ok(Network::new(
            self.protocol,
            mobility,
            Radio::new(self.channel),
            self.params,
            flows,
            self.seed,
        ))
    }
}

/// Everything one run produces, config echo included.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub protocol: Protocol,
    /// Simulated duration, seconds.
    pub sim_time: f64,
    pub seed: u64,
    pub sent: u64,
    pub received: u64,
    pub forwarded: u64,
    pub control_tx: u64,
    /// The tabulated convention: sent / received x 100.
    pub paper_pdr: f64,
    /// The conventional ratio: received / sent.
    pub pdr: f64,
    /// Bytes of delivered payload per second.
    pub throughput_bps: f64,
    /// Mean end-to-end delay, seconds (infinite when nothing arrived).
    pub avg_delay_s: f64,
    /// Control transmissions per delivered packet.
    pub nrl: f64,
    pub drops: BTreeMap<String, u64>,
    /// Packets still buffered or in flight at the end of the run.
    pub outstanding: u64,
    /// Wall-clock runtime, milliseconds.
    pub wall_ms: u64,
}

/// Runs one scenario to completion and collapses it into a [`RunResult`].
/// Deterministic: identical config gives identical results.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult, ScenarioError> {
    let started = std::time::Instant::now();
    let mut net = cfg.build_network()?;
    net.run_to(SimTime::from_secs_f64(cfg.duration));
    Ok(collect_result(&net, cfg, started.elapsed().as_millis() as u64))
}

/// Extracts the result of a finished (or stepped) run.
pub fn collect_result(net: &Network, cfg: &ScenarioConfig, wall_ms: u64) -> RunResult {
    let m = &net.ctx.metrics;
    let acc = net.ctx.registry.accounting();
    // Conservation identity: every generated packet is delivered, dropped,
    // or still in the system. The two bookkeepers must agree.
    assert!(acc.balances(), "accounting identity violated: {acc:?}");
    assert_eq!(acc.sent, m.sent, "registry and metrics disagree on sent");
    assert_eq!(acc.received, m.received, "registry and metrics disagree on received");
    assert_eq!(acc.dropped_total(), m.dropped_total(), "drop counts disagree");

    let drops = acc
        .drops
        .iter()
        .map(|(reason, count)| (reason.to_string(), *count))
        .collect();
    RunResult {
        protocol: cfg.protocol,
        sim_time: cfg.duration,
        seed: cfg.seed,
        sent: m.sent,
        received: m.received,
        forwarded: m.forwarded,
        control_tx: m.control_tx,
        paper_pdr: metrics::paper_pdr(m.sent, m.received),
        pdr: metrics::pdr(m.sent, m.received),
        throughput_bps: metrics::throughput(m.data_bytes_received, cfg.duration),
        avg_delay_s: metrics::avg_e2e_delay(&m.latency_samples_us),
        nrl: metrics::nrl(m.control_tx, m.received),
        drops,
        outstanding: acc.outstanding,
        wall_ms,
    }
}

/// Runs the cartesian product protocol x time x seed, in parallel, and
/// returns results ordered by (protocol, time, seed). Any failing run
/// aborts the sweep with the partial count flagged in the error.
pub fn sweep(
    base: &ScenarioConfig,
    protocols: &[Protocol],
    times: &[f64],
    seeds: &[u64],
) -> Result<Vec<RunResult>, ScenarioError> {
    if protocols.is_empty() || times.is_empty() || seeds.is_empty() {
        return Err(ScenarioError::Invalid(
            "sweep needs at least one protocol, one time and one seed".into(),
        ));
    }
    let mut jobs = Vec::new();
    for protocol in protocols {
        for time in times {
            for seed in seeds {
                let mut cfg = base.clone();
                cfg.protocol = *protocol;
                cfg.duration = *time;
                cfg.seed = *seed;
                jobs.push(cfg);
            }
        }
    }
    // Fail fast on config errors before spinning up workers.
    for cfg in &jobs {
        cfg.validate().map_err(|e| ScenarioError::SweepRun {
            protocol: cfg.protocol,
            sim_time: cfg.duration,
            seed: cfg.seed,
            completed: 0,
            source: Box::new(e),
        })?;
    }

    let slots: Vec<Mutex<Option<Result<RunResult, ScenarioError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map(usize::from).unwrap_or(1).min(jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let outcome = run_scenario(&jobs[i]);
                *slots[i].lock().expect("slot lock") = Some(outcome);
            });
        }
    });

    let mut results = Vec::with_capacity(jobs.len());
    for (i, slot) in slots.into_iter().enumerate() {
        let outcome = slot.into_inner().expect("slot lock").expect("worker filled every slot");
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => {
                return Err(ScenarioError::SweepRun {
                    protocol: jobs[i].protocol,
                    sim_time: jobs[i].duration,
                    seed: jobs[i].seed,
                    completed: results.len(),
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(results)
}

/// Per-(protocol, time) arithmetic means over seeds, in (protocol, time)
/// order. Infinite markers propagate through the mean.
pub fn seed_averages(results: &[RunResult]) -> Vec<RunResult> {
    let mut groups: BTreeMap<(Protocol, u64), Vec<&RunResult>> = BTreeMap::new();
    for r in results {
        groups.entry((r.protocol, r.sim_time.to_bits())).or_default().push(r);
    }
    groups
        .into_values()
        .map(|group| {
            let n = group.len() as f64;
            let mean = |f: &dyn Fn(&RunResult) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            let mut drops: BTreeMap<String, u64> = BTreeMap::new();
            for r in &group {
                for (k, v) in &r.drops {
                    *drops.entry(k.clone()).or_insert(0) += v;
                }
            }
            RunResult {
                protocol: group[0].protocol,
                sim_time: group[0].sim_time,
                seed: 0, // marker: averaged rows print "avg" in reports
                sent: mean(&|r| r.sent as f64).round() as u64,
                received: mean(&|r| r.received as f64).round() as u64,
                forwarded: mean(&|r| r.forwarded as f64).round() as u64,
                control_tx: mean(&|r| r.control_tx as f64).round() as u64,
                paper_pdr: mean(&|r| r.paper_pdr),
                pdr: mean(&|r| r.pdr),
                throughput_bps: mean(&|r| r.throughput_bps),
                avg_delay_s: mean(&|r| r.avg_delay_s),
                nrl: mean(&|r| r.nrl),
                drops,
                outstanding: mean(&|r| r.outstanding as f64).round() as u64,
                wall_ms: group.iter().map(|r| r.wall_ms).sum(),
            }
        })
        .collect()
}

/// Permanent ordering for report rows.
pub fn sort_results(results: &mut [RunResult]) {
    results.sort_by(|a, b| {
        (a.protocol, a.sim_time.to_bits(), a.seed).cmp(&(b.protocol, b.sim_time.to_bits(), b.seed))
    });
}
