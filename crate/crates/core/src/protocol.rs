//! Round engine: clustering, cluster-head election, transmission and energy
//! accounting, repeated until the network is depleted or a round cap is hit.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fcm::{run_fcm, FcmConfig, FcmError, MembershipMatrix};
use crate::metrics::intra_cluster_distance;
use crate::model::{deploy_network, ModelError, NetworkConfig, Node, Point, RadioParams};
use crate::wsa::{nearest, run_wsa, EnergyLandscape, WsaConfig, WsaError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("no alive nodes remain")]
    NetworkDepleted,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fcm(#[from] FcmError),
    #[error(transparent)]
    Wsa(#[from] WsaError),
    #[error("invalid {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Water-strider search seeding fuzzy c-means.
    WsaFcm,
    /// Fuzzy c-means from random initial centroids.
    FcmOnly,
    /// Random alive nodes as centroids, nearest assignment.
    #[serde(rename = "random")]
    RandomCh,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::WsaFcm, Strategy::FcmOnly, Strategy::RandomCh];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::WsaFcm => "wsa-fcm",
            Strategy::FcmOnly => "fcm-only",
            Strategy::RandomCh => "random",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wsa-fcm" | "wsa_fcm" => Ok(Strategy::WsaFcm),
            "fcm-only" | "fcm_only" | "fcm" => Ok(Strategy::FcmOnly),
            "random" | "random-ch" | "random_ch" => Ok(Strategy::RandomCh),
            other => Err(format!(
                "unknown strategy {other:?} (expected wsa-fcm, fcm-only or random)"
            )),
        }
    }
}

/// Everything one simulation run needs besides the strategy and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub network: NetworkConfig,
    pub radio: RadioParams,
    pub wsa: WsaConfig,
    pub fcm: FcmConfig,
    pub round_cap: usize,
    /// Re-cluster every this many rounds; heads are re-elected every round.
    pub recluster_every: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::default(),
            radio: RadioParams::default(),
            wsa: WsaConfig::default(),
            fcm: FcmConfig::default(),
            round_cap: 5000,
            recluster_every: 1,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        self.network.validate()?;
        self.radio.validate()?;
        self.wsa.validate()?;
        self.fcm.validate()?;
        if self.round_cap == 0 {
            return Err(ProtocolError::InvalidConfig {
                field: "round_cap",
                reason: "must be >= 1".into(),
            });
        }
        if self.recluster_every == 0 {
            return Err(ProtocolError::InvalidConfig {
                field: "recluster_every",
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Output of a clustering pass over the alive nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<Point>,
    /// Ids of the nodes that took part, in membership-row order.
    pub members: Vec<usize>,
    pub memberships: MembershipMatrix,
    /// Best-fitness curve of the global search, when one ran.
    pub convergence: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAssignment {
    /// Cluster of each node by id; `None` for nodes that are not alive.
    pub membership_of: Vec<Option<usize>>,
    /// Head node id of each cluster; `None` for empty clusters.
    pub cluster_heads: Vec<Option<usize>>,
    pub centroids: Vec<Point>,
}

impl ClusterAssignment {
    pub fn head_of(&self, node: usize) -> Option<usize> {
        self.membership_of[node].and_then(|c| self.cluster_heads[c])
    }

    pub fn is_head(&self, node: usize) -> bool {
        self.head_of(node) == Some(node)
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.membership_of
            .iter()
            .enumerate()
            .filter(move |(_, c)| **c == Some(cluster))
            .map(|(id, _)| id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundLog {
    pub round_index: usize,
    /// Alive nodes at the end of the round.
    pub alive_count: usize,
    pub total_residual_energy: f64,
    pub energy_spent: f64,
    pub dead_this_round: Vec<usize>,
    pub assignment: ClusterAssignment,
    pub mean_intra_cluster_distance: f64,
    /// Predicted round cost from the fuzzy memberships and centroids.
    pub predicted_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace {
    pub config: SimulationConfig,
    pub strategy: Strategy,
    pub seed: u64,
    pub positions: Vec<Point>,
    pub rounds: Vec<RoundLog>,
    pub terminated_at: usize,
    /// Convergence curve of the first global search (WSA-FCM only).
    pub wsa_convergence: Option<Vec<f64>>,
}

impl SimulationTrace {
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }
}

/// Generator used by the clustering strategies: ChaCha8 keyed by the same
/// seed as the deployment but on stream 1, so strategies compared on one
/// seed see identical deployments.
pub fn clustering_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn random_centroids<R: Rng + ?Sized>(k: usize, side: f64, rng: &mut R) -> Vec<Point> {
    (0..k)
        .map(|_| Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side))
        .collect()
}

/// Clusters the alive nodes into at most `k` groups (fewer if fewer nodes
/// are alive).
pub fn form_clusters<R: Rng + ?Sized>(
    strategy: Strategy,
    nodes: &[Node],
    k: usize,
    config: &SimulationConfig,
    rng: &mut R,
) -> Result<Clustering, ProtocolError> {
    let alive: Vec<&Node> = nodes.iter().filter(|n| n.alive).collect();
    if alive.is_empty() {
        return Err(ProtocolError::NetworkDepleted);
    }
    let k = k.clamp(1, alive.len());
    let members: Vec<usize> = alive.iter().map(|n| n.id).collect();
    let positions: Vec<Point> = alive.iter().map(|n| n.position).collect();
    let side = config.network.field_size;

    let clustering = match strategy {
        Strategy::WsaFcm => {
            let landscape = EnergyLandscape::from_positions(
                positions.clone(),
                config.network.sink_position,
                config.radio,
                side,
            )?;
            let search = run_wsa(&landscape, k, &config.wsa, rng)?;
            let refined = run_fcm(&positions, &search.best_centroids, &config.fcm)?;
            Clustering {
                centroids: refined.centroids,
                members,
                memberships: refined.memberships,
                convergence: Some(search.convergence_curve),
            }
        }
        Strategy::FcmOnly => {
            let init = random_centroids(k, side, rng);
            let refined = run_fcm(&positions, &init, &config.fcm)?;
            Clustering {
                centroids: refined.centroids,
                members,
                memberships: refined.memberships,
                convergence: None,
            }
        }
        Strategy::RandomCh => {
            let picks = sample(rng, positions.len(), k);
            let centroids: Vec<Point> = picks.iter().map(|i| positions[i]).collect();
            let labels: Vec<usize> = positions
                .iter()
                .map(|&x| nearest(x, &centroids).0)
                .collect();
            Clustering {
                memberships: MembershipMatrix::crisp(&labels, k),
                centroids,
                members,
                convergence: None,
            }
        }
    };
    Ok(clustering)
}

/// Crisp assignment by per-node argmax, then one head per non-empty cluster:
/// highest residual energy, then closest to the centroid, then lowest id.
pub fn elect_cluster_heads(nodes: &[Node], clustering: &Clustering) -> ClusterAssignment {
    let k = clustering.centroids.len();
    let mut membership_of = vec![None; nodes.len()];
    let mut cluster_heads: Vec<Option<usize>> = vec![None; k];

    for (row, &id) in clustering.members.iter().enumerate() {
        if !nodes[id].alive {
            continue;
        }
        let c = clustering.memberships.argmax(row);
        membership_of[id] = Some(c);
        let candidate = &nodes[id];
        let replace = match cluster_heads[c] {
            None => true,
            Some(h) => {
                let head = &nodes[h];
                let centroid = clustering.centroids[c];
                let dc = candidate.position.distance(centroid);
                let dh = head.position.distance(centroid);
                candidate.residual_energy > head.residual_energy
                    || (candidate.residual_energy == head.residual_energy
                        && (dc < dh || (dc == dh && candidate.id < head.id)))
            }
        };
        if replace {
            cluster_heads[c] = Some(id);
        }
    }

    ClusterAssignment {
        membership_of,
        cluster_heads,
        centroids: clustering.centroids.clone(),
    }
}

/// Plays one round of traffic over `assignment`, deducting energy from
/// `nodes`. A node that cannot pay for its next action is drained to zero
/// and dies without performing it.
pub fn run_round(
    nodes: &mut [Node],
    assignment: &ClusterAssignment,
    sink: Point,
    radio: &RadioParams,
    round_index: usize,
) -> RoundLog {
    let bits = radio.packet_bits;
    let mut spent = 0.0;
    let mut dead = Vec::new();
    let mean_intra = intra_cluster_distance(assignment, nodes);

    let mut charge = |node: &mut Node, cost: f64, dead: &mut Vec<usize>| -> bool {
        match node.spend(cost) {
            Ok(e) => {
                spent += e;
                true
            }
            Err(e) => {
                spent += e;
                dead.push(node.id);
                false
            }
        }
    };

    for (cluster, head) in assignment.cluster_heads.iter().enumerate() {
        let Some(head) = *head else { continue };
        let head_pos = nodes[head].position;

        let mut delivered = 0u64;
        for id in assignment.members(cluster) {
            if id == head || !nodes[id].alive {
                continue;
            }
            let cost = radio.packet_tx(nodes[id].position.distance(head_pos));
            if charge(&mut nodes[id], cost, &mut dead) {
                delivered += 1;
            }
        }

        let ch = &mut nodes[head];
        if !ch.alive {
            continue;
        }
        let mut ok = true;
        for _ in 0..delivered {
            if !charge(ch, radio.rx_energy(bits), &mut dead) {
                ok = false;
                break;
            }
        }
        ok = ok && charge(ch, radio.aggregation_energy(bits, delivered + 1), &mut dead);
        if ok {
            charge(ch, radio.packet_tx(head_pos.distance(sink)), &mut dead);
        }
    }

    dead.sort_unstable();
    let alive_count = nodes.iter().filter(|n| n.alive).count();
    let total_residual_energy = nodes
        .iter()
        .filter(|n| n.alive)
        .map(|n| n.residual_energy)
        .sum();
    RoundLog {
        round_index,
        alive_count,
        total_residual_energy,
        energy_spent: spent,
        dead_this_round: dead,
        assignment: assignment.clone(),
        mean_intra_cluster_distance: mean_intra,
        predicted_energy: 0.0,
    }
}

/// Predicted round cost from soft memberships: every membership-weighted
/// member-to-centroid transmission plus aggregation, and one centroid-to-sink
/// transmission per cluster.
pub fn expected_round_energy(
    positions: &[Point],
    memberships: &MembershipMatrix,
    centroids: &[Point],
    sink: Point,
    radio: &RadioParams,
    fuzzifier: f64,
) -> f64 {
    let bits = radio.packet_bits;
    let e_agg = radio.aggregation_energy(bits, 1);
    let intra: f64 = positions
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            memberships
                .row(i)
                .iter()
                .zip(centroids)
                .map(|(&u, &c)| u.powf(fuzzifier) * (radio.packet_tx(x.distance(c)) + e_agg))
                .sum::<f64>()
        })
        .sum();
    let uplink: f64 = centroids
        .iter()
        .map(|c| radio.packet_tx(c.distance(sink)))
        .sum();
    intra + uplink
}

fn predicted_for_alive(nodes: &[Node], clustering: &Clustering, config: &SimulationConfig) -> f64 {
    let rows: Vec<usize> = (0..clustering.members.len())
        .filter(|&r| nodes[clustering.members[r]].alive)
        .collect();
    let positions: Vec<Point> = rows
        .iter()
        .map(|&r| nodes[clustering.members[r]].position)
        .collect();
    let memberships = MembershipMatrix::from_rows(
        &rows
            .iter()
            .map(|&r| clustering.memberships.row(r).to_vec())
            .collect::<Vec<_>>(),
    );
    expected_round_energy(
        &positions,
        &memberships,
        &clustering.centroids,
        config.network.sink_position,
        &config.radio,
        config.fcm.fuzzifier,
    )
}

/// Deploys a network from `seed` and plays rounds until every node is dead
/// or `round_cap` rounds have run.
pub fn simulate(
    config: &SimulationConfig,
    strategy: Strategy,
    seed: u64,
) -> Result<SimulationTrace, ProtocolError> {
    config.validate()?;
    let mut nodes = deploy_network(&config.network, seed);
    simulate_nodes(config, strategy, seed, &mut nodes)
}

/// Like [`simulate`] but on a caller-supplied deployment.
pub fn simulate_nodes(
    config: &SimulationConfig,
    strategy: Strategy,
    seed: u64,
    nodes: &mut [Node],
) -> Result<SimulationTrace, ProtocolError> {
    config.validate()?;
    let mut rng = clustering_rng(seed);
    let k = config.network.clusters();
    let sink = config.network.sink_position;
    let positions: Vec<Point> = nodes.iter().map(|n| n.position).collect();

    let mut rounds = Vec::new();
    let mut clustering: Option<Clustering> = None;
    let mut wsa_convergence = None;
    let mut round = 0;

    while round < config.round_cap && nodes.iter().any(|n| n.alive) {
        round += 1;
        let due = (round - 1) % config.recluster_every == 0;
        let mut assignment = None;
        if !due {
            if let Some(c) = &clustering {
                let a = elect_cluster_heads(nodes, c);
                if a.cluster_heads.iter().any(Option::is_some) {
                    assignment = Some(a);
                }
            }
        }
        let assignment = match assignment {
            Some(a) => a,
            None => {
                let fresh = form_clusters(strategy, nodes, k, config, &mut rng)?;
                if wsa_convergence.is_none() {
                    wsa_convergence = fresh.convergence.clone();
                }
                let a = elect_cluster_heads(nodes, &fresh);
                clustering = Some(fresh);
                a
            }
        };
        let predicted = clustering
            .as_ref()
            .map_or(0.0, |c| predicted_for_alive(nodes, c, config));
        let mut log = run_round(nodes, &assignment, sink, &config.radio, round);
        log.predicted_energy = predicted;
        rounds.push(log);
    }

    Ok(SimulationTrace {
        config: config.clone(),
        strategy,
        seed,
        positions,
        rounds,
        terminated_at: round,
        wsa_convergence,
    })
}
