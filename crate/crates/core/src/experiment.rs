//! Experiment orchestration behind the `wsafcm` binary: single runs,
//! multi-seed strategy comparisons and network-size sweeps, and the files
//! each of them writes.
//!
//! Output formats:
//!
//! * `trace_<strategy>_seed<seed>.csv`:
//!   `round,alive,total_residual_J,dead_ids,mean_intra_dist_m`, one row per
//!   round, `dead_ids` separated by `;`.
//! * `summary_<strategy>_seed<seed>.json`:
//!   `{"strategy","seed","FND","LND","half_life","rounds"}`, unreached
//!   milestones as `null`.
//! * `convergence_<strategy>_seed<seed>.csv`: `iteration,best_fitness_J` for
//!   the first global search (WSA-FCM only).
//! * `comparison.json`: see [`ComparisonReport`].
//! * `sweep.csv`: `n,k,ms_per_round,scaling_factor,peak_rss_mb`.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::fcm::{FcmConfig, FcmError};
use crate::metrics::{
    aggregate_runs, lifetime_metrics, MetricStats, MetricsError, RunSummary, DEFAULT_CHECKPOINTS,
};
use crate::model::{deploy_network, ModelError, NetworkConfig, RadioParams};
use crate::protocol::{
    clustering_rng, elect_cluster_heads, form_clusters, run_round, simulate, ProtocolError,
    SimulationConfig, SimulationTrace, Strategy,
};
use crate::stats::{cohens_d, paired_t_test};
use crate::wsa::{WsaConfig, WsaError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl ExperimentError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> Self {
        let context = context.into();
        move |source| Self::Io { context, source }
    }

    /// Process exit code: 1 for validation errors, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation { .. } => 1,
            _ => 2,
        }
    }
}

impl From<ProtocolError> for ExperimentError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Model(ModelError::InvalidParameter { field, reason })
            | ProtocolError::Fcm(FcmError::InvalidConfig { field, reason })
            | ProtocolError::Wsa(WsaError::InvalidConfig { field, reason })
            | ProtocolError::InvalidConfig { field, reason } => Self::invalid(field, reason),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<MetricsError> for ExperimentError {
    fn from(e: MetricsError) -> Self {
        Self::Runtime(e.to_string())
    }
}

fn default_strategies() -> Vec<Strategy> {
    vec![Strategy::WsaFcm, Strategy::FcmOnly, Strategy::RandomCh]
}

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_sweep_sizes() -> Vec<usize> {
    vec![200, 400, 800]
}

/// Every tunable of an experiment. Loaded from a TOML file; missing keys take
/// their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub network: NetworkConfig,
    pub radio: RadioParams,
    pub wsa: WsaConfig,
    pub fcm: FcmConfig,
    pub round_cap: usize,
    pub recluster_every: usize,
    /// The first entry is the reference the others are tested against.
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub checkpoints: Vec<usize>,
    pub output_dir: PathBuf,
    pub sweep_sizes: Vec<usize>,
    pub sweep_repetitions: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let sim = SimulationConfig::default();
        Self {
            network: sim.network,
            radio: sim.radio,
            wsa: sim.wsa,
            fcm: sim.fcm,
            round_cap: sim.round_cap,
            recluster_every: sim.recluster_every,
            strategies: default_strategies(),
            seeds: default_seeds(),
            checkpoints: DEFAULT_CHECKPOINTS.to_vec(),
            output_dir: default_output_dir(),
            sweep_sizes: default_sweep_sizes(),
            sweep_repetitions: 5,
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text)
            .map_err(|e| ExperimentError::invalid("config", e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path)
            .map_err(ExperimentError::io(format!("reading {}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn simulation(&self) -> SimulationConfig {
        SimulationConfig {
            network: self.network,
            radio: self.radio,
            wsa: self.wsa,
            fcm: self.fcm,
            round_cap: self.round_cap,
            recluster_every: self.recluster_every,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.simulation().validate()?;
        if self.seeds.is_empty() {
            return Err(ExperimentError::invalid(
                "seeds",
                "at least one seed is required",
            ));
        }
        if self.strategies.is_empty() {
            return Err(ExperimentError::invalid(
                "strategies",
                "at least one strategy is required",
            ));
        }
        Ok(())
    }
}

fn format_dead(ids: &[usize]) -> String {
    ids.iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

/// Per-round trace as CSV text.
pub fn trace_csv(trace: &SimulationTrace) -> String {
    let mut out = String::from("round,alive,total_residual_J,dead_ids,mean_intra_dist_m\n");
    for log in &trace.rounds {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            log.round_index,
            log.alive_count,
            log.total_residual_energy,
            format_dead(&log.dead_this_round),
            log.mean_intra_cluster_distance
        ));
    }
    out
}

pub fn convergence_csv(curve: &[f64]) -> String {
    let mut out = String::from("iteration,best_fitness_J\n");
    for (i, f) in curve.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, f));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub strategy: Strategy,
    pub seed: u64,
    #[serde(rename = "FND")]
    pub fnd: Option<usize>,
    #[serde(rename = "LND")]
    pub lnd: Option<usize>,
    pub half_life: Option<usize>,
    pub rounds: usize,
}

impl RunRecord {
    pub fn from_trace(trace: &SimulationTrace) -> Result<Self, ExperimentError> {
        let lt = lifetime_metrics(trace)?;
        Ok(Self {
            strategy: trace.strategy,
            seed: trace.seed,
            fnd: lt.fnd,
            lnd: lt.lnd,
            half_life: lt.half_life,
            rounds: trace.terminated_at,
        })
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    fs::write(path, contents).map_err(ExperimentError::io(format!("writing {}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(ExperimentError::io(format!("creating {}", dir.display())))
}

/// Paths written by [`cmd_run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: PathBuf,
    pub summary: PathBuf,
    pub convergence: Option<PathBuf>,
    pub record: RunRecord,
}

pub fn cmd_run(
    spec: &ExperimentSpec,
    strategy: Strategy,
    seed: u64,
) -> Result<RunOutput, ExperimentError> {
    spec.validate()?;
    let trace = simulate(&spec.simulation(), strategy, seed)?;
    let record = RunRecord::from_trace(&trace)?;

    let dir = &spec.output_dir;
    ensure_dir(dir)?;
    let stem = format!("{strategy}_seed{seed}");
    let trace_path = dir.join(format!("trace_{stem}.csv"));
    write_file(&trace_path, &trace_csv(&trace))?;
    let summary_path = dir.join(format!("summary_{stem}.json"));
    let json = serde_json::to_string_pretty(&record).expect("run record serializes");
    write_file(&summary_path, &(json + "\n"))?;
    let convergence = match &trace.wsa_convergence {
        Some(curve) => {
            let path = dir.join(format!("convergence_{stem}.csv"));
            write_file(&path, &convergence_csv(curve))?;
            Some(path)
        }
        None => None,
    };

    Ok(RunOutput {
        trace: trace_path,
        summary: summary_path,
        convergence,
        record,
    })
}

fn serialize_stat<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) if x.is_infinite() => s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" }),
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyStats {
    pub strategy: Strategy,
    pub metrics: Vec<MetricStats>,
}

/// One metric of one strategy tested against the reference strategy.
///
/// `t` and `d` are oriented reference minus strategy; an infinite value is
/// written as the string `"inf"` or `"-inf"`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub strategy: Strategy,
    pub versus: Strategy,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub reference_mean: Option<f64>,
    pub reference_sd: Option<f64>,
    /// Seeds where both runs reached the metric.
    pub pairs: usize,
    #[serde(serialize_with = "serialize_stat")]
    pub t: Option<f64>,
    pub p: Option<f64>,
    #[serde(serialize_with = "serialize_stat")]
    pub d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub reference: Strategy,
    pub node_count: usize,
    pub clusters: usize,
    pub seeds: Vec<u64>,
    pub strategies: Vec<StrategyStats>,
    pub comparisons: Vec<ComparisonRow>,
}

/// Runs every (strategy, seed) pair, aggregates per strategy and tests each
/// strategy after the first against the first, pairing runs by seed.
pub fn compare(spec: &ExperimentSpec) -> Result<ComparisonReport, ExperimentError> {
    spec.validate()?;
    if spec.strategies.len() < 2 {
        return Err(ExperimentError::invalid(
            "strategies",
            "comparison needs at least two strategies",
        ));
    }
    if spec.seeds.len() < 2 {
        return Err(ExperimentError::invalid(
            "seeds",
            "comparison needs at least two seeds (sample SD is undefined for one)",
        ));
    }
    let sim = spec.simulation();
    let jobs: Vec<(usize, u64)> = (0..spec.strategies.len())
        .flat_map(|s| spec.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let summaries: Vec<RunSummary> = jobs
        .par_iter()
        .map(|&(s, seed)| {
            let trace = simulate(&sim, spec.strategies[s], seed)?;
            Ok(RunSummary::from_trace(&trace, &spec.checkpoints)?)
        })
        .collect::<Result<_, ExperimentError>>()?;

    let per_strategy: Vec<&[RunSummary]> = summaries.chunks(spec.seeds.len()).collect();
    let stats: Vec<StrategyStats> = spec
        .strategies
        .iter()
        .zip(&per_strategy)
        .map(|(&strategy, runs)| {
            Ok(StrategyStats {
                strategy,
                metrics: aggregate_runs(runs)?,
            })
        })
        .collect::<Result<_, ExperimentError>>()?;

    let reference = spec.strategies[0];
    let values = |runs: &[RunSummary]| -> Vec<HashMap<String, f64>> {
        runs.iter()
            .map(|r| {
                r.metric_values()
                    .into_iter()
                    .filter_map(|(k, v)| v.map(|v| (k, v)))
                    .collect()
            })
            .collect()
    };
    let ref_values = values(per_strategy[0]);
    let mut comparisons = Vec::new();
    for (idx, &strategy) in spec.strategies.iter().enumerate().skip(1) {
        let other_values = values(per_strategy[idx]);
        for (m, ref_stat) in stats[0].metrics.iter().enumerate() {
            let name = &ref_stat.metric;
            let (a, b): (Vec<f64>, Vec<f64>) = ref_values
                .iter()
                .zip(&other_values)
                .filter_map(|(r, o)| Some((*r.get(name)?, *o.get(name)?)))
                .unzip();
            let (t, p, d) = match (paired_t_test(&a, &b), cohens_d(&a, &b)) {
                (Ok(tt), Ok(d)) => (Some(tt.t), Some(tt.p), Some(d)),
                _ => (None, None, None),
            };
            let own = &stats[idx].metrics[m];
            comparisons.push(ComparisonRow {
                metric: name.clone(),
                strategy,
                versus: reference,
                mean: own.mean,
                sd: own.sd,
                reference_mean: ref_stat.mean,
                reference_sd: ref_stat.sd,
                pairs: a.len(),
                t,
                p,
                d,
            });
        }
    }

    Ok(ComparisonReport {
        reference,
        node_count: spec.network.node_count,
        clusters: spec.network.clusters(),
        seeds: spec.seeds.clone(),
        strategies: stats,
        comparisons,
    })
}

/// [`compare`] and write `comparison.json` into the output directory.
pub fn cmd_compare(spec: &ExperimentSpec) -> Result<(PathBuf, ComparisonReport), ExperimentError> {
    let report = compare(spec)?;
    ensure_dir(&spec.output_dir)?;
    let path = spec.output_dir.join("comparison.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&path, &(json + "\n"))?;
    Ok((path, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub k: usize,
    pub ms_per_round: f64,
    /// Runtime relative to the smallest network size.
    pub scaling_factor: f64,
    /// Process peak resident set after the measurement, when the platform
    /// reports it.
    pub peak_rss_mb: Option<f64>,
}

/// Peak resident set size of this process in MB (Linux `VmHWM`).
pub fn peak_rss_mb() -> Option<f64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

/// Timed replays of each sweep repetition; the fastest one is kept.
const REPLAYS: usize = 3;

/// Wall-clock of one clustering round (cluster, elect, transmit) at each
/// network size, averaged over `spec.sweep_repetitions` fresh deployments.
/// A repeated size reuses its measurement.
pub fn sweep(
    spec: &ExperimentSpec,
    strategy: Strategy,
    seed: u64,
) -> Result<Vec<SweepRow>, ExperimentError> {
    spec.validate()?;
    if spec.sweep_sizes.len() < 2 {
        return Err(ExperimentError::invalid(
            "sweep_sizes",
            "need at least two sizes",
        ));
    }
    if spec.sweep_repetitions < 5 {
        return Err(ExperimentError::invalid(
            "sweep_repetitions",
            format!("must be >= 5, got {}", spec.sweep_repetitions),
        ));
    }

    let mut sizes: Vec<(usize, SimulationConfig)> = Vec::new();
    for &n in &spec.sweep_sizes {
        if sizes.iter().any(|(m, _)| *m == n) {
            continue;
        }
        let mut sim = spec.simulation();
        sim.network.node_count = n;
        sim.validate()?;
        sizes.push((n, sim));
    }

    // Sizes are interleaved within each repetition so that a slow stretch
    // on the machine affects every size alike.
    let mut total_ms = vec![0.0; sizes.len()];
    let mut rss = vec![None; sizes.len()];
    for rep in 0..spec.sweep_repetitions {
        let rep_seed = seed + rep as u64;
        for (slot, (_, sim)) in sizes.iter().enumerate() {
            let k = sim.network.clusters();
            let deployed = deploy_network(&sim.network, rep_seed);
            // A repetition is deterministic, so replaying it and keeping the
            // fastest replay filters out scheduler interference while the
            // mean over seeds keeps the data-dependent cost.
            let mut best_ms = f64::INFINITY;
            for _ in 0..REPLAYS {
                let mut nodes = deployed.clone();
                let mut rng = clustering_rng(rep_seed);
                let start = Instant::now();
                let clustering = form_clusters(strategy, &nodes, k, sim, &mut rng)?;
                let assignment = elect_cluster_heads(&nodes, &clustering);
                run_round(
                    &mut nodes,
                    &assignment,
                    sim.network.sink_position,
                    &sim.radio,
                    1,
                );
                best_ms = best_ms.min(start.elapsed().as_secs_f64() * 1e3);
            }
            total_ms[slot] += best_ms;
            if rep == 0 {
                rss[slot] = peak_rss_mb();
            }
        }
    }
    let timed: HashMap<usize, (usize, f64, Option<f64>)> = sizes
        .iter()
        .enumerate()
        .map(|(slot, (n, sim))| {
            let ms = total_ms[slot] / spec.sweep_repetitions as f64;
            (*n, (sim.network.clusters(), ms, rss[slot]))
        })
        .collect();

    let smallest = *spec.sweep_sizes.iter().min().expect("at least two sizes");
    let base = timed[&smallest].1;
    Ok(spec
        .sweep_sizes
        .iter()
        .map(|n| {
            let (k, ms, rss) = timed[n];
            SweepRow {
                n: *n,
                k,
                ms_per_round: ms,
                scaling_factor: ms / base,
                peak_rss_mb: rss,
            }
        })
        .collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("n,k,ms_per_round,scaling_factor,peak_rss_mb\n");
    for r in rows {
        let rss = r
            .peak_rss_mb
            .map_or("unavailable".to_string(), |v| format!("{v:.1}"));
        out.push_str(&format!(
            "{},{},{:.3},{:.3},{}\n",
            r.n, r.k, r.ms_per_round, r.scaling_factor, rss
        ));
    }
    out
}

/// [`sweep`] and write `sweep.csv` into the output directory.
pub fn cmd_sweep(
    spec: &ExperimentSpec,
    strategy: Strategy,
    seed: u64,
) -> Result<(PathBuf, Vec<SweepRow>), ExperimentError> {
    let rows = sweep(spec, strategy, seed)?;
    ensure_dir(&spec.output_dir)?;
    let path = spec.output_dir.join("sweep.csv");
    write_file(&path, &sweep_csv(&rows))?;
    Ok((path, rows))
}

/// Parses `a..b` (inclusive) or a comma-separated list of seeds.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("expected a..b or a comma-separated list, got {text:?}");
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b
            .trim_start_matches('=')
            .trim()
            .parse()
            .map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}
