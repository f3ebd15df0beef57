//! Radio energy model, deployment geometry and the network configuration
//! shared by every other module.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used when comparing energies (J).
pub const ENERGY_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("distance must be finite and non-negative, got {0}")]
    NegativeDistance(f64),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

/// A point (or displacement) in the deployment plane, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(self, other: Point) -> f64 {
        self.distance_sq(other).sqrt()
    }

    /// Clamps both coordinates to `[0, side]`.
    pub fn clamp_to_field(self, side: f64) -> Point {
        Point::new(self.x.clamp(0.0, side), self.y.clamp(0.0, side))
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// First-order radio model constants.
///
/// Energies are in joules per bit; `eps_fs` is per m², `eps_mp` per m⁴.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioParams {
    pub e_elec: f64,
    pub eps_fs: f64,
    pub eps_mp: f64,
    pub e_da: f64,
    pub packet_bits: u64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            e_elec: 50e-9,
            eps_fs: 10e-12,
            eps_mp: 0.0013e-12,
            e_da: 5e-9,
            packet_bits: 4096,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = |field, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(field, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("e_elec", self.e_elec)?;
        positive("eps_fs", self.eps_fs)?;
        positive("eps_mp", self.eps_mp)?;
        positive("e_da", self.e_da)?;
        if self.packet_bits == 0 {
            return Err(invalid("packet_bits", "must be > 0"));
        }
        Ok(())
    }

    /// Crossover distance between the free-space and multipath regimes.
    pub fn threshold_distance(&self) -> f64 {
        (self.eps_fs / self.eps_mp).sqrt()
    }

    /// Energy to transmit `bits` over `distance` metres.
    pub fn tx_energy(&self, bits: u64, distance: f64) -> Result<f64, ModelError> {
        if !distance.is_finite() || distance < 0.0 {
            return Err(ModelError::NegativeDistance(distance));
        }
        Ok(self.tx_cost(bits, distance))
    }

    /// Infallible form of [`tx_energy`](Self::tx_energy) for distances that
    /// come out of a Euclidean norm.
    pub(crate) fn tx_cost(&self, bits: u64, distance: f64) -> f64 {
        let b = bits as f64;
        let amp = if distance < self.threshold_distance() {
            self.eps_fs * distance * distance
        } else {
            self.eps_mp * distance.powi(4)
        };
        b * self.e_elec + b * amp
    }

    /// Transmit cost of one packet of `packet_bits`.
    pub fn packet_tx(&self, distance: f64) -> f64 {
        self.tx_cost(self.packet_bits, distance.max(0.0))
    }

    pub fn rx_energy(&self, bits: u64) -> f64 {
        bits as f64 * self.e_elec
    }

    pub fn aggregation_energy(&self, bits: u64, signals: u64) -> f64 {
        bits as f64 * self.e_da * signals as f64
    }
}

/// Number of clusters: a fixed count or derived from the network size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterCount {
    Fixed(usize),
    /// `round(sqrt(n) / 2)`, at least 1.
    Auto,
}

impl ClusterCount {
    pub fn resolve(self, node_count: usize) -> usize {
        match self {
            ClusterCount::Fixed(k) => k,
            ClusterCount::Auto => auto_cluster_count(node_count),
        }
    }
}

pub fn auto_cluster_count(node_count: usize) -> usize {
    ((node_count as f64).sqrt() / 2.0).round().max(1.0) as usize
}

impl fmt::Display for ClusterCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterCount::Fixed(k) => write!(f, "{k}"),
            ClusterCount::Auto => f.write_str("auto"),
        }
    }
}

impl std::str::FromStr for ClusterCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(ClusterCount::Auto);
        }
        s.parse::<usize>()
            .map(ClusterCount::Fixed)
            .map_err(|_| format!("expected a positive integer or \"auto\", got {s:?}"))
    }
}

impl Serialize for ClusterCount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ClusterCount::Fixed(k) => s.serialize_u64(*k as u64),
            ClusterCount::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for ClusterCount {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(k) => Ok(ClusterCount::Fixed(k as usize)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub node_count: usize,
    /// Side length of the square field (m).
    pub field_size: f64,
    /// Initial energy per node (J).
    pub initial_energy: f64,
    pub cluster_count: ClusterCount,
    pub sink_position: Point,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            node_count: 200,
            field_size: 100.0,
            initial_energy: 0.5,
            cluster_count: ClusterCount::Fixed(5),
            sink_position: Point::new(50.0, 50.0),
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.node_count == 0 {
            return Err(invalid("node_count", "must be >= 1"));
        }
        if !(self.field_size.is_finite() && self.field_size > 0.0) {
            return Err(invalid(
                "field_size",
                format!("must be finite and > 0, got {}", self.field_size),
            ));
        }
        if !(self.initial_energy.is_finite() && self.initial_energy > 0.0) {
            return Err(invalid(
                "initial_energy",
                format!("must be finite and > 0, got {}", self.initial_energy),
            ));
        }
        if let ClusterCount::Fixed(k) = self.cluster_count {
            if k == 0 || k > self.node_count {
                return Err(invalid(
                    "cluster_count",
                    format!("must be in 1..={}, got {k}", self.node_count),
                ));
            }
        }
        if !(self.sink_position.x.is_finite() && self.sink_position.y.is_finite()) {
            return Err(invalid("sink_position", "coordinates must be finite"));
        }
        Ok(())
    }

    pub fn clusters(&self) -> usize {
        self.cluster_count.resolve(self.node_count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub position: Point,
    pub residual_energy: f64,
    pub alive: bool,
}

impl Node {
    pub fn new(id: usize, position: Point, energy: f64) -> Self {
        Self {
            id,
            position,
            residual_energy: energy,
            alive: energy > 0.0,
        }
    }

    /// Deducts `cost` if the node can cover it. Otherwise the node is drained
    /// to zero and marked dead. Returns the energy actually removed.
    pub(crate) fn spend(&mut self, cost: f64) -> Result<f64, f64> {
        debug_assert!(self.alive);
        if self.residual_energy > cost {
            self.residual_energy -= cost;
            Ok(cost)
        } else {
            let drained = self.residual_energy;
            self.residual_energy = 0.0;
            self.alive = false;
            Err(drained)
        }
    }
}

/// Deployment generator: ChaCha8 seeded from `seed` via `seed_from_u64`,
/// each node drawing `x` then `y` as `U[0,1) * L`.
pub fn deployment_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Places `node_count` nodes uniformly on the field, all at full energy.
pub fn deploy_network(config: &NetworkConfig, seed: u64) -> Vec<Node> {
    let mut rng = deployment_rng(seed);
    let side = config.field_size;
    (0..config.node_count)
        .map(|id| {
            let x = rng.random::<f64>() * side;
            let y = rng.random::<f64>() * side;
            Node::new(id, Point::new(x, y), config.initial_energy)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1e-30)
    }

    #[test]
    fn threshold_distance_cases() {
        let p = RadioParams::default();
        assert!((p.threshold_distance() - 87.705).abs() < 0.01);

        let eq = RadioParams {
            eps_mp: p.eps_fs,
            ..p
        };
        assert_eq!(eq.threshold_distance(), 1.0);
        let sq = RadioParams {
            eps_fs: 4.0 * p.eps_mp,
            ..p
        };
        assert!((sq.threshold_distance() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tx_energy_branches() {
        let p = RadioParams::default();
        assert!(close(p.tx_energy(4096, 0.0).unwrap(), 2.048e-4));
        assert!(close(p.tx_energy(4096, 50.0).unwrap(), 3.072e-4));
        assert!(close(p.tx_energy(4096, 100.0).unwrap(), 7.3728e-4));
    }

    #[test]
    fn tx_energy_continuous_at_threshold() {
        let p = RadioParams::default();
        let d0 = p.threshold_distance();
        let at = p.tx_energy(4096, d0).unwrap();
        let fs = 4096.0 * (p.e_elec + p.eps_fs * d0 * d0);
        assert!((at - fs).abs() < 1e-15);
        let below = p.tx_energy(4096, d0 * (1.0 - 1e-12)).unwrap();
        assert!((at - below).abs() < 1e-15);
    }

    #[test]
    fn tx_energy_rejects_bad_distance() {
        let p = RadioParams::default();
        assert_eq!(
            p.tx_energy(8, -1.0),
            Err(ModelError::NegativeDistance(-1.0))
        );
        assert!(p.tx_energy(8, f64::NAN).is_err());
    }

    #[test]
    fn rx_and_aggregation() {
        let p = RadioParams::default();
        assert!(close(p.rx_energy(4096), 2.048e-4));
        assert_eq!(p.rx_energy(0), 0.0);
        assert_eq!(p.rx_energy(4096), p.tx_energy(4096, 0.0).unwrap());
        assert!(close(p.aggregation_energy(4096, 1), 2.048e-5));
        assert_eq!(p.aggregation_energy(4096, 0), 0.0);
        assert!(close(p.aggregation_energy(4096, 10), 2.048e-4));
    }

    #[test]
    fn radio_validation() {
        assert!(RadioParams::default().validate().is_ok());
        let bad = RadioParams {
            eps_mp: 0.0,
            ..Default::default()
        };
        match bad.validate() {
            Err(ModelError::InvalidParameter { field, .. }) => assert_eq!(field, "eps_mp"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn auto_cluster_counts() {
        assert_eq!(auto_cluster_count(200), 7);
        assert_eq!(auto_cluster_count(400), 10);
        assert_eq!(auto_cluster_count(800), 14);
        assert_eq!(auto_cluster_count(1), 1);
        assert_eq!("auto".parse::<ClusterCount>(), Ok(ClusterCount::Auto));
        assert_eq!("7".parse::<ClusterCount>(), Ok(ClusterCount::Fixed(7)));
    }

    #[test]
    fn config_rejects_too_many_clusters() {
        let cfg = NetworkConfig {
            node_count: 4,
            cluster_count: ClusterCount::Fixed(5),
            ..Default::default()
        };
        match cfg.validate() {
            Err(ModelError::InvalidParameter { field, .. }) => assert_eq!(field, "cluster_count"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deployment_is_seeded() {
        let cfg = NetworkConfig::default();
        let a = deploy_network(&cfg, 42);
        let b = deploy_network(&cfg, 42);
        assert_eq!(a, b);
        assert_ne!(a, deploy_network(&cfg, 43));
        assert_eq!(a.len(), 200);
        for n in &a {
            assert!((0.0..=100.0).contains(&n.position.x));
            assert!((0.0..=100.0).contains(&n.position.y));
            assert_eq!(n.residual_energy, 0.5);
            assert!(n.alive);
        }
        let single = deploy_network(
            &NetworkConfig {
                node_count: 1,
                cluster_count: ClusterCount::Fixed(1),
                ..cfg
            },
            7,
        );
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn spend_drains_and_kills() {
        let mut n = Node::new(0, Point::ORIGIN, 1.0);
        assert_eq!(n.spend(0.25), Ok(0.25));
        assert_eq!(n.spend(2.0), Err(0.75));
        assert!(!n.alive);
        assert_eq!(n.residual_energy, 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tx_monotone_and_above_rx(d1 in 0.0f64..300.0, d2 in 0.0f64..300.0, bits in 0u64..10_000) {
                let p = RadioParams::default();
                let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
                let e_lo = p.tx_energy(bits, lo).unwrap();
                let e_hi = p.tx_energy(bits, hi).unwrap();
                prop_assert!(e_lo <= e_hi);
                prop_assert!(e_lo >= p.rx_energy(bits));
                prop_assert!(p.tx_energy(bits + 1, hi).unwrap() >= e_hi);
                prop_assert!(e_hi.is_finite() && e_hi >= 0.0);
            }
        }
    }
}
