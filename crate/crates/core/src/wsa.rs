//! Water-strider global search over sets of `k` cluster-head positions.
//!
//! Each agent carries `k` centroids. A move pulls every centroid toward the
//! population best and toward a randomly chosen partner, on top of a damped
//! copy of the agent's previous displacement:
//!
//! ```text
//! x' = clamp(x + ω·v + σ·(r1 ∘ (x_best − x) + r2 ∘ (x_rand − x)))
//! ```
//!
//! Moves that worsen an agent's fitness are rejected, so the best fitness
//! seen by [`run_wsa`] never increases.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fcm::{fcm_objective, MembershipMatrix};
use crate::model::{Node, Point, RadioParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WsaError {
    #[error("no alive nodes left to cluster")]
    NoAliveNodes,
    #[error("at least one centroid is required")]
    NoCentroids,
    #[error("invalid WSA config field {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WsaConfig {
    pub population_size: usize,
    pub iterations: usize,
    /// Step scale applied to the attraction terms.
    pub sigma: f64,
    /// Damping applied to the previous displacement, in `[0, 1]`.
    pub inertia: f64,
}

impl Default for WsaConfig {
    fn default() -> Self {
        Self {
            population_size: 30,
            iterations: 50,
            sigma: 1.0,
            inertia: 0.5,
        }
    }
}

impl WsaConfig {
    pub fn validate(&self) -> Result<(), WsaError> {
        if self.population_size < 2 {
            return Err(WsaError::InvalidConfig {
                field: "population_size",
                reason: format!("must be >= 2, got {}", self.population_size),
            });
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(WsaError::InvalidConfig {
                field: "sigma",
                reason: format!("must be finite and >= 0, got {}", self.sigma),
            });
        }
        if !(0.0..=1.0).contains(&self.inertia) {
            return Err(WsaError::InvalidConfig {
                field: "inertia",
                reason: format!("must lie in [0, 1], got {}", self.inertia),
            });
        }
        Ok(())
    }
}

/// The positions and radio constants a candidate solution is scored against.
#[derive(Debug, Clone)]
pub struct EnergyLandscape {
    positions: Vec<Point>,
    sink: Point,
    radio: RadioParams,
    field_size: f64,
}

impl EnergyLandscape {
    /// Builds a landscape over the alive nodes.
    pub fn new(
        nodes: &[Node],
        sink: Point,
        radio: RadioParams,
        field_size: f64,
    ) -> Result<Self, WsaError> {
        let positions: Vec<Point> = nodes
            .iter()
            .filter(|n| n.alive)
            .map(|n| n.position)
            .collect();
        Self::from_positions(positions, sink, radio, field_size)
    }

    pub fn from_positions(
        positions: Vec<Point>,
        sink: Point,
        radio: RadioParams,
        field_size: f64,
    ) -> Result<Self, WsaError> {
        if positions.is_empty() {
            return Err(WsaError::NoAliveNodes);
        }
        Ok(Self {
            positions,
            sink,
            radio,
            field_size,
        })
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn field_size(&self) -> f64 {
        self.field_size
    }

    /// Mean over nodes of node-to-nearest-centroid plus centroid-to-sink
    /// transmit energy.
    pub fn cost(&self, centroids: &[Point]) -> f64 {
        assert!(!centroids.is_empty(), "at least one centroid is required");
        let sink_cost: Vec<f64> = centroids
            .iter()
            .map(|c| self.radio.packet_tx(c.distance(self.sink)))
            .collect();
        let total: f64 = self
            .positions
            .iter()
            .map(|&x| {
                let (j, d2) = nearest(x, centroids);
                self.radio.packet_tx(d2.sqrt()) + sink_cost[j]
            })
            .sum();
        total / self.positions.len() as f64
    }
}

/// Nearest centroid and its squared distance; ties resolve to the lower index.
pub(crate) fn nearest(x: Point, centroids: &[Point]) -> (usize, f64) {
    let mut best = (0, x.distance_sq(centroids[0]));
    for (j, &c) in centroids.iter().enumerate().skip(1) {
        let d2 = x.distance_sq(c);
        if d2 < best.1 {
            best = (j, d2);
        }
    }
    best
}

/// Per-node energy cost of clustering the alive `nodes` around `centroids`.
pub fn fitness(
    centroids: &[Point],
    nodes: &[Node],
    sink: Point,
    radio: &RadioParams,
) -> Result<f64, WsaError> {
    if centroids.is_empty() {
        return Err(WsaError::NoCentroids);
    }
    // Field size only matters for moves, not scoring.
    let landscape = EnergyLandscape::new(nodes, sink, *radio, f64::INFINITY)?;
    Ok(landscape.cost(centroids))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StriderAgent {
    pub centroids: Vec<Point>,
    /// Displacement applied by the agent's last accepted move.
    pub velocity: Vec<Point>,
    pub fitness: f64,
}

impl StriderAgent {
    pub fn new(centroids: Vec<Point>, landscape: &EnergyLandscape) -> Self {
        let fitness = landscape.cost(&centroids);
        let velocity = vec![Point::ORIGIN; centroids.len()];
        Self {
            centroids,
            velocity,
            fitness,
        }
    }

    fn random<R: Rng + ?Sized>(k: usize, landscape: &EnergyLandscape, rng: &mut R) -> Self {
        let side = landscape.field_size;
        let centroids = (0..k)
            .map(|_| Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side))
            .collect();
        Self::new(centroids, landscape)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WsaResult {
    pub best_centroids: Vec<Point>,
    pub best_fitness: f64,
    /// Global best fitness after each iteration.
    pub convergence_curve: Vec<f64>,
}

/// Moves every agent once. Partners and the best position are read from the
/// population as it stood before the step.
pub fn wsa_step<R: Rng + ?Sized>(
    population: &mut [StriderAgent],
    best: &StriderAgent,
    landscape: &EnergyLandscape,
    config: &WsaConfig,
    rng: &mut R,
) {
    let size = population.len();
    assert!(size >= 2, "population must hold at least two agents");
    let snapshot: Vec<Vec<Point>> = population.iter().map(|a| a.centroids.clone()).collect();
    let side = landscape.field_size;

    for (i, agent) in population.iter_mut().enumerate() {
        let mut partner = rng.random_range(0..size - 1);
        if partner >= i {
            partner += 1;
        }
        let partner = &snapshot[partner];

        let candidate: Vec<Point> = agent
            .centroids
            .iter()
            .zip(&agent.velocity)
            .zip(best.centroids.iter().zip(partner))
            .map(|((&x, &v), (&xb, &xr))| {
                let r1 = Point::new(rng.random::<f64>(), rng.random::<f64>());
                let r2 = Point::new(rng.random::<f64>(), rng.random::<f64>());
                let to_best = xb - x;
                let to_rand = xr - x;
                let pull = Point::new(
                    r1.x * to_best.x + r2.x * to_rand.x,
                    r1.y * to_best.y + r2.y * to_rand.y,
                );
                (x + v * config.inertia + pull * config.sigma).clamp_to_field(side)
            })
            .collect();

        let candidate_fitness = landscape.cost(&candidate);
        if candidate_fitness <= agent.fitness {
            agent.velocity = candidate
                .iter()
                .zip(&agent.centroids)
                .map(|(&new, &old)| new - old)
                .collect();
            agent.centroids = candidate;
            agent.fitness = candidate_fitness;
        } else {
            agent.velocity.fill(Point::ORIGIN);
        }
    }
}

fn best_index(population: &[StriderAgent]) -> usize {
    let mut best = 0;
    for (i, a) in population.iter().enumerate().skip(1) {
        if a.fitness < population[best].fitness {
            best = i;
        }
    }
    best
}

pub fn run_wsa<R: Rng + ?Sized>(
    landscape: &EnergyLandscape,
    k: usize,
    config: &WsaConfig,
    rng: &mut R,
) -> Result<WsaResult, WsaError> {
    config.validate()?;
    if k == 0 {
        return Err(WsaError::NoCentroids);
    }
    let mut population: Vec<StriderAgent> = (0..config.population_size)
        .map(|_| StriderAgent::random(k, landscape, rng))
        .collect();
    let mut best = population[best_index(&population)].clone();
    let mut curve = Vec::with_capacity(config.iterations);

    for _ in 0..config.iterations {
        wsa_step(&mut population, &best, landscape, config, rng);
        let leader = &population[best_index(&population)];
        if leader.fitness < best.fitness {
            best = leader.clone();
        }
        curve.push(best.fitness);
    }

    Ok(WsaResult {
        best_centroids: best.centroids,
        best_fitness: best.fitness,
        convergence_curve: curve,
    })
}

/// Weights of the combined diagnostic objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridWeights {
    pub energy: f64,
    pub compactness: f64,
    pub depletion: f64,
}

/// Weighted sum of the clustering energy cost, the fuzzy compactness
/// objective and the mean energy deficit of the alive nodes.
///
/// `memberships` rows follow the alive nodes in order. Diagnostic only; the
/// search itself is driven by [`fitness`].
#[allow(clippy::too_many_arguments)]
pub fn hybrid_objective(
    centroids: &[Point],
    memberships: &MembershipMatrix,
    nodes: &[Node],
    sink: Point,
    radio: &RadioParams,
    fuzzifier: f64,
    initial_energy: f64,
    weights: HybridWeights,
) -> Result<f64, WsaError> {
    let alive: Vec<&Node> = nodes.iter().filter(|n| n.alive).collect();
    let energy = fitness(centroids, nodes, sink, radio)?;
    let positions: Vec<Point> = alive.iter().map(|n| n.position).collect();
    let compactness = fcm_objective(&positions, centroids, memberships, fuzzifier);
    let mean_residual = alive.iter().map(|n| n.residual_energy).sum::<f64>() / alive.len() as f64;
    let deficit = initial_energy - mean_residual;
    Ok(weights.energy * energy + weights.compactness * compactness + weights.depletion * deficit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn node(id: usize, x: f64, y: f64) -> Node {
        Node::new(id, Point::new(x, y), 0.5)
    }

    fn scattered(n: usize, seed: u64) -> Vec<Node> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| node(i, rng.random::<f64>() * 100.0, rng.random::<f64>() * 100.0))
            .collect()
    }

    #[test]
    fn fitness_hand_value() {
        let radio = RadioParams::default();
        let f = fitness(
            &[Point::new(0.0, 0.0)],
            &[node(0, 0.0, 0.0)],
            Point::new(0.0, 100.0),
            &radio,
        )
        .unwrap();
        assert!((f - 9.4208e-4).abs() < 1e-15);

        let f = fitness(
            &[Point::new(3.0, 3.0)],
            &[node(0, 3.0, 3.0)],
            Point::new(3.0, 3.0),
            &radio,
        )
        .unwrap();
        assert!((f - 2.0 * 4096.0 * 50e-9).abs() < 1e-15);
    }

    #[test]
    fn fitness_ignores_dead_nodes_and_errors_when_none_alive() {
        let radio = RadioParams::default();
        let mut nodes = vec![node(0, 0.0, 0.0), node(1, 90.0, 90.0)];
        nodes[1].alive = false;
        nodes[1].residual_energy = 0.0;
        let f = fitness(&[Point::ORIGIN], &nodes, Point::ORIGIN, &radio).unwrap();
        assert!((f - 2.0 * radio.rx_energy(4096)).abs() < 1e-15);
        nodes[0].alive = false;
        assert_eq!(
            fitness(&[Point::ORIGIN], &nodes, Point::ORIGIN, &radio),
            Err(WsaError::NoAliveNodes)
        );
    }

    #[test]
    fn fitness_permutation_invariant() {
        let radio = RadioParams::default();
        let nodes = scattered(12, 3);
        let cs = vec![
            Point::new(20.0, 30.0),
            Point::new(70.0, 60.0),
            Point::new(50.0, 10.0),
        ];
        let sink = Point::new(50.0, 50.0);
        let f = fitness(&cs, &nodes, sink, &radio).unwrap();
        let mut rev_cs = cs.clone();
        rev_cs.reverse();
        let mut rev_nodes = nodes.clone();
        rev_nodes.reverse();
        let g = fitness(&rev_cs, &rev_nodes, sink, &radio).unwrap();
        assert!((f - g).abs() <= 1e-15 * f);
    }

    fn landscape(nodes: &[Node]) -> EnergyLandscape {
        EnergyLandscape::new(nodes, Point::new(50.0, 50.0), RadioParams::default(), 100.0).unwrap()
    }

    #[test]
    fn frozen_step_leaves_population_unchanged() {
        let nodes = scattered(10, 1);
        let land = landscape(&nodes);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pop: Vec<StriderAgent> = (0..5)
            .map(|_| StriderAgent::random(2, &land, &mut rng))
            .collect();
        let before = pop.clone();
        let cfg = WsaConfig {
            sigma: 0.0,
            inertia: 0.0,
            ..Default::default()
        };
        let best = pop[0].clone();
        wsa_step(&mut pop, &best, &land, &cfg, &mut rng);
        for (a, b) in pop.iter().zip(&before) {
            assert_eq!(a.centroids, b.centroids);
        }
    }

    #[test]
    fn agent_at_best_with_identical_partner_stays_put() {
        let nodes = scattered(10, 2);
        let land = landscape(&nodes);
        let cs = vec![Point::new(25.0, 25.0), Point::new(75.0, 75.0)];
        let agent = StriderAgent::new(cs.clone(), &land);
        let mut pop = vec![agent.clone(), agent.clone()];
        let cfg = WsaConfig {
            inertia: 0.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        wsa_step(&mut pop, &agent, &land, &cfg, &mut rng);
        assert_eq!(pop[0].centroids, cs);
        assert_eq!(pop[1].centroids, cs);
    }

    #[test]
    fn step_is_deterministic_and_stays_in_field() {
        let nodes = scattered(20, 5);
        let land = landscape(&nodes);
        let cfg = WsaConfig {
            sigma: 3.0,
            inertia: 1.0,
            ..Default::default()
        };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut pop: Vec<StriderAgent> = (0..8)
                .map(|_| StriderAgent::random(3, &land, &mut rng))
                .collect();
            for _ in 0..20 {
                let best = pop[best_index(&pop)].clone();
                wsa_step(&mut pop, &best, &land, &cfg, &mut rng);
            }
            pop
        };
        let a = run();
        assert_eq!(a, run());
        for agent in &a {
            for c in &agent.centroids {
                assert!((0.0..=100.0).contains(&c.x) && (0.0..=100.0).contains(&c.y));
            }
            assert_eq!(agent.fitness, land.cost(&agent.centroids));
        }
    }

    #[test]
    fn zero_iterations_returns_initial_best() {
        let nodes = scattered(6, 8);
        let land = landscape(&nodes);
        let cfg = WsaConfig {
            iterations: 0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = run_wsa(&land, 2, &cfg, &mut rng).unwrap();
        assert!(r.convergence_curve.is_empty());
        assert_eq!(r.best_fitness, land.cost(&r.best_centroids));
    }

    #[test]
    fn single_node_beats_far_corner() {
        let nodes = vec![node(0, 12.0, 20.0)];
        let land = landscape(&nodes);
        let corner = land.cost(&[Point::new(100.0, 100.0)]);
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = run_wsa(&land, 1, &WsaConfig::default(), &mut rng).unwrap();
            assert!(r.best_fitness <= corner);
        }
    }

    #[test]
    fn config_validation() {
        let cfg = WsaConfig {
            population_size: 1,
            ..Default::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(WsaError::InvalidConfig {
                field: "population_size",
                ..
            })
        ));
        let cfg = WsaConfig {
            inertia: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hybrid_objective_reductions() {
        let radio = RadioParams::default();
        let nodes = scattered(7, 21);
        let sink = Point::new(50.0, 50.0);
        let cs = vec![Point::new(30.0, 30.0), Point::new(60.0, 70.0)];
        let positions: Vec<Point> = nodes.iter().map(|n| n.position).collect();
        let u = crate::fcm::update_memberships(&positions, &cs, 2.0);
        let eval = |w| hybrid_objective(&cs, &u, &nodes, sink, &radio, 2.0, 0.5, w).unwrap();

        let only_energy = HybridWeights {
            energy: 1.0,
            compactness: 0.0,
            depletion: 0.0,
        };
        assert_eq!(
            eval(only_energy),
            fitness(&cs, &nodes, sink, &radio).unwrap()
        );
        let only_fcm = HybridWeights {
            energy: 0.0,
            compactness: 1.0,
            depletion: 0.0,
        };
        assert_eq!(eval(only_fcm), fcm_objective(&positions, &cs, &u, 2.0));
        let only_deficit = HybridWeights {
            energy: 0.0,
            compactness: 0.0,
            depletion: 1.0,
        };
        assert_eq!(eval(only_deficit), 0.0);
    }
}
