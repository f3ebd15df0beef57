use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wsafcm::experiment::{
    cmd_compare, cmd_run, cmd_sweep, parse_seeds, ExperimentError, ExperimentSpec,
};
use wsafcm::{ClusterCount, Strategy};

#[derive(Parser)]
#[command(
    name = "wsafcm",
    version,
    about = "WSN clustering simulator (WSA-FCM and baselines)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one strategy on one seed and write its trace and summary.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "wsa-fcm")]
        strategy: Strategy,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run every strategy on every seed and write a paired comparison report.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated strategies; the first is the reference.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<Strategy>>,
        /// Inclusive range `a..b` or a comma-separated list.
        #[arg(long, value_parser = parse_seed_list)]
        seeds: Option<SeedList>,
    },
    /// Time one clustering round across network sizes.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "wsa-fcm")]
        strategy: Strategy,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Comma-separated node counts.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
}

#[derive(Clone)]
struct SeedList(Vec<u64>);

fn parse_seed_list(text: &str) -> Result<SeedList, String> {
    parse_seeds(text).map(SeedList)
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Cluster count, or "auto" for round(sqrt(n)/2).
    #[arg(long)]
    clusters: Option<ClusterCount>,
    /// Round cap.
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    recluster_every: Option<usize>,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec, ExperimentError> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::load(path)?,
            None => ExperimentSpec::default(),
        };
        if let Some(n) = self.nodes {
            spec.network.node_count = n;
        }
        if let Some(k) = self.clusters {
            spec.network.cluster_count = k;
        }
        if let Some(r) = self.rounds {
            spec.round_cap = r;
        }
        if let Some(out) = &self.out {
            spec.output_dir = out.clone();
        }
        if let Some(r) = self.recluster_every {
            spec.recluster_every = r;
        }
        Ok(spec)
    }
}

fn execute(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run {
            common,
            strategy,
            seed,
        } => {
            let spec = common.spec()?;
            let out = cmd_run(&spec, strategy, seed)?;
            let fmt = |v: Option<usize>| v.map_or("not reached".to_string(), |r| r.to_string());
            println!(
                "{strategy} seed {seed}: FND {} LND {} half-life {} ({} rounds)",
                fmt(out.record.fnd),
                fmt(out.record.lnd),
                fmt(out.record.half_life),
                out.record.rounds
            );
            println!("wrote {}", out.trace.display());
            println!("wrote {}", out.summary.display());
            if let Some(c) = out.convergence {
                println!("wrote {}", c.display());
            }
        }
        Command::Compare {
            common,
            strategies,
            seeds,
        } => {
            let mut spec = common.spec()?;
            if let Some(s) = strategies {
                spec.strategies = s;
            }
            if let Some(SeedList(s)) = seeds {
                spec.seeds = s;
            }
            let (path, report) = cmd_compare(&spec)?;
            for row in report.comparisons.iter().filter(|r| {
                matches!(
                    r.metric.as_str(),
                    "fnd" | "lnd" | "half_life" | "mean_intra_distance_m"
                )
            }) {
                let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
                println!(
                    "{:<22} {:>8} mean {:>10} vs {:>10}  t {:>9} p {:>9} d {:>8}",
                    row.metric,
                    row.strategy.name(),
                    show(row.mean),
                    show(row.reference_mean),
                    show(row.t),
                    show(row.p),
                    show(row.d)
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Sweep {
            common,
            strategy,
            seed,
            sizes,
            repetitions,
        } => {
            let mut spec = common.spec()?;
            if let Some(s) = sizes {
                spec.sweep_sizes = s;
            }
            if let Some(r) = repetitions {
                spec.sweep_repetitions = r;
            }
            let (path, rows) = cmd_sweep(&spec, strategy, seed)?;
            for r in &rows {
                println!(
                    "n={:<5} k={:<3} {:>9.3} ms/round  x{:.2}",
                    r.n, r.k, r.ms_per_round, r.scaling_factor
                );
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
