//! Shared helpers for the integration and acceptance suites.
//!
//! The graph oracle here is intentionally independent of the simulator's
//! radio and routing code: adjacency is recomputed from raw positions and
//! distances are plain breadth-first search, so protocol results are checked
//! against something that cannot share their bugs.

use manet_sim::net::{Network, ProtocolParams};
use manet_sim::traffic::CbrFlow;
use manet_sim::{
    ChannelConfig, MobilitySource, NodeId, Position, Protocol, Radio, RngStream,
};

/// Unit-disk adjacency from raw positions (closed ball, like the radio).
pub fn unit_disk_adjacency(positions: &[(f64, f64)], range: f64) -> Vec<Vec<usize>> {
    let n = positions.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = positions[i].0 - positions[j].0;
            let dy = positions[i].1 - positions[j].1;
            if (dx * dx + dy * dy).sqrt() <= range {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

/// Breadth-first hop distances from `src`; `None` marks unreachable nodes.
pub fn bfs_distances(adj: &[Vec<usize>], src: usize) -> Vec<Option<u32>> {
    let mut dist = vec![None; adj.len()];
    dist[src] = Some(0);
    let mut queue = std::collections::VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].expect("queued nodes have distances");
        for &w in &adj[v] {
            if dist[w].is_none() {
                dist[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

pub fn is_connected(adj: &[Vec<usize>]) -> bool {
    bfs_distances(adj, 0).iter().all(Option::is_some)
}

/// Random connected unit-disk layout of `n` nodes. The arena scales with
/// the node count so multi-hop topologies stay common; if a draw comes out
/// disconnected the arena shrinks and the draw repeats.
pub fn random_connected_positions(n: usize, range: f64, rng: &mut RngStream) -> Vec<(f64, f64)> {
    let mut side = range * (1.0 + (n as f64).sqrt() / 2.0);
    loop {
        for _ in 0..40 {
            let positions: Vec<(f64, f64)> =
                (0..n).map(|_| (rng.range_f64(0.0, side), rng.range_f64(0.0, side))).collect();
            if is_connected(&unit_disk_adjacency(&positions, range)) {
                return positions;
            }
        }
        side *= 0.85;
    }
}

pub fn fixed_mobility(positions: &[(f64, f64)]) -> MobilitySource {
    let pts: Vec<Position> = positions.iter().map(|(x, y)| Position { x: *x, y: *y }).collect();
    MobilitySource::fixed(&pts).unwrap()
}

/// A static network with the default lossless channel.
pub fn static_network(
    protocol: Protocol,
    positions: &[(f64, f64)],
    flows: Vec<CbrFlow>,
    seed: u64,
) -> Network {
    Network::new(
        protocol,
        fixed_mobility(positions),
        Radio::new(ChannelConfig::default()),
        ProtocolParams::default(),
        flows,
        seed,
    )
}

/// A flow that emits exactly one packet at `at_us`.
pub fn single_packet_flow(src: usize, dst: usize, at_us: u64) -> CbrFlow {
    CbrFlow {
        src: NodeId(src as u32),
        dst: NodeId(dst as u32),
        packet_size: 64,
        interval_us: u64::MAX / 4,
        start_us: at_us,
        stop_us: at_us,
    }
}

/// A steady flow over `[start_us, stop_us]`.
pub fn steady_flow(src: usize, dst: usize, interval_us: u64, start_us: u64, stop_us: u64) -> CbrFlow {
    CbrFlow {
        src: NodeId(src as u32),
        dst: NodeId(dst as u32),
        packet_size: 64,
        interval_us,
        start_us,
        stop_us,
    }
}
