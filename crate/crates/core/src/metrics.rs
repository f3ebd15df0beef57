//! Lifetime and energy metrics over simulation traces, plus multi-run
//! aggregation.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::model::Node;
use crate::protocol::{ClusterAssignment, SimulationTrace};
use crate::stats::{mean, sample_sd};

/// Residual-energy checkpoints (rounds) reported by default.
pub const DEFAULT_CHECKPOINTS: [usize; 4] = [200, 400, 500, 600];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("trace has no rounds")]
    EmptyTrace,
    #[error("no runs to aggregate")]
    NoRuns,
}

/// Round indices of death milestones; `None` means not reached before the
/// trace ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LifetimeMetrics {
    pub fnd: Option<usize>,
    pub lnd: Option<usize>,
    pub half_life: Option<usize>,
    pub p90_death: Option<usize>,
}

impl LifetimeMetrics {
    /// `fnd <= half_life <= p90_death <= lnd` over the milestones reached.
    pub fn is_ordered(&self) -> bool {
        let seq = [self.fnd, self.half_life, self.p90_death, self.lnd];
        let reached: Vec<usize> = seq.iter().map_while(|m| *m).collect();
        // once a milestone is missing, all later ones must be too
        seq[reached.len()..].iter().all(Option::is_none) && reached.windows(2).all(|w| w[0] <= w[1])
    }
}

pub fn lifetime_metrics(trace: &SimulationTrace) -> Result<LifetimeMetrics, MetricsError> {
    if trace.rounds.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let n = trace.node_count();
    let mut dead = 0usize;
    let mut out = LifetimeMetrics {
        fnd: None,
        lnd: None,
        half_life: None,
        p90_death: None,
    };
    for log in &trace.rounds {
        dead += log.dead_this_round.len();
        let r = log.round_index;
        if out.fnd.is_none() && !log.dead_this_round.is_empty() {
            out.fnd = Some(r);
        }
        // dead/n >= 0.5 and >= 0.9, in integer form
        if out.half_life.is_none() && 2 * dead >= n {
            out.half_life = Some(r);
        }
        if out.p90_death.is_none() && 10 * dead >= 9 * n {
            out.p90_death = Some(r);
        }
        if out.lnd.is_none() && log.alive_count == 0 {
            out.lnd = Some(r);
        }
    }
    Ok(out)
}

/// Mean distance from each alive non-head member to its cluster head; 0 when
/// there are no such members.
pub fn intra_cluster_distance(assignment: &ClusterAssignment, nodes: &[Node]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (id, cluster) in assignment.membership_of.iter().enumerate() {
        let Some(c) = *cluster else { continue };
        let Some(head) = assignment.cluster_heads[c] else {
            continue;
        };
        if head == id || !nodes[id].alive {
            continue;
        }
        total += nodes[id].position.distance(nodes[head].position);
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub lifetime: LifetimeMetrics,
    /// Network residual energy (J) at the end of each checkpoint round.
    pub residual_at: BTreeMap<usize, f64>,
    /// Mean residual energy per deployed node (J) at each checkpoint.
    pub residual_per_node_at: BTreeMap<usize, f64>,
    /// Mean of the per-round intra-cluster distance up to and including FND.
    pub mean_intra_distance: f64,
}

/// Network residual energy after round `round`; the initial budget for
/// round 0 and the final value once the trace has ended.
pub fn residual_after(trace: &SimulationTrace, round: usize) -> f64 {
    if round == 0 {
        return trace.config.network.initial_energy * trace.node_count() as f64;
    }
    match trace.rounds.get(round - 1) {
        Some(log) => log.total_residual_energy,
        None => trace.rounds.last().map_or(0.0, |l| l.total_residual_energy),
    }
}

/// Mean per-round intra-cluster distance over rounds `1..=last_round`.
pub fn mean_intra_distance_until(trace: &SimulationTrace, last_round: usize) -> f64 {
    let values: Vec<f64> = trace
        .rounds
        .iter()
        .take(last_round)
        .map(|l| l.mean_intra_cluster_distance)
        .collect();
    mean(&values).unwrap_or(0.0)
}

impl RunSummary {
    pub fn from_trace(
        trace: &SimulationTrace,
        checkpoints: &[usize],
    ) -> Result<Self, MetricsError> {
        let lifetime = lifetime_metrics(trace)?;
        let n = trace.node_count() as f64;
        let residual_at: BTreeMap<usize, f64> = checkpoints
            .iter()
            .map(|&r| (r, residual_after(trace, r)))
            .collect();
        let residual_per_node_at = residual_at.iter().map(|(&r, &e)| (r, e / n)).collect();
        let window = lifetime.fnd.unwrap_or(trace.rounds.len());
        Ok(Self {
            lifetime,
            residual_at,
            residual_per_node_at,
            mean_intra_distance: mean_intra_distance_until(trace, window),
        })
    }

    /// Named scalar metrics; unreached milestones are omitted.
    pub fn metric_values(&self) -> Vec<(String, Option<f64>)> {
        let lt = &self.lifetime;
        let mut out = vec![
            ("fnd".to_string(), lt.fnd.map(|v| v as f64)),
            ("lnd".to_string(), lt.lnd.map(|v| v as f64)),
            ("half_life".to_string(), lt.half_life.map(|v| v as f64)),
            ("p90_death".to_string(), lt.p90_death.map(|v| v as f64)),
        ];
        for (r, e) in &self.residual_at {
            out.push((format!("residual_j_at_{r}"), Some(*e)));
        }
        for (r, e) in &self.residual_per_node_at {
            out.push((format!("residual_per_node_j_at_{r}"), Some(*e)));
        }
        out.push((
            "mean_intra_distance_m".to_string(),
            Some(self.mean_intra_distance),
        ));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricStats {
    pub metric: String,
    pub mean: Option<f64>,
    /// Sample SD (n−1); absent with fewer than two values.
    pub sd: Option<f64>,
    /// Runs that reached this metric.
    pub count: usize,
}

/// Mean and sample SD of every metric across runs.
pub fn aggregate_runs(summaries: &[RunSummary]) -> Result<Vec<MetricStats>, MetricsError> {
    let first = summaries.first().ok_or(MetricsError::NoRuns)?;
    let names: Vec<String> = first.metric_values().into_iter().map(|(n, _)| n).collect();
    let per_run: Vec<Vec<(String, Option<f64>)>> =
        summaries.iter().map(RunSummary::metric_values).collect();
    Ok(names
        .into_iter()
        .enumerate()
        .map(|(i, metric)| {
            let values: Vec<f64> = per_run
                .iter()
                .filter_map(|m| m.get(i).and_then(|v| v.1))
                .collect();
            MetricStats {
                metric,
                mean: mean(&values),
                sd: sample_sd(&values),
                count: values.len(),
            }
        })
        .collect())
}
