//! Command-line driver for trend-aware seed selection: speedup-time search,
//! the no-speedup baseline, Monte Carlo evaluation and parameter sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tapdip_core::{synth, DelayDist};

pub use config::{Delta, RunConfig, Weighting};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "tapdip", version, about = "Trend-aware influence seeding")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the speedup time and the seed set for the trend-triggered problem.
    Solve(ConfigArgs),
    /// Minimum seeds for the activation requirement with no speedup.
    BaseTap {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// A `solve` result to compare seed sets against.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Monte Carlo evaluation of a seed set.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// JSON array of node ids, or a solve/base-tap result.
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Dip)]
        mode: ModeArg,
        /// Fixed speedup time for `--mode fixed`; omitted means no speedup.
        #[arg(long)]
        speedup_at: Option<f64>,
        #[arg(long, value_enum)]
        source: Option<SourceArg>,
    },
    /// Solve over a grid of rates and requirements, writing CSV.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',')]
        rates: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        trigger_counts: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        activate_counts: Vec<usize>,
    },
    /// Minimum seeds for a list of thresholds read from a JSON file.
    Mtap {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// JSON list of {ground_set, required, deadline, rate_profile}.
        #[arg(long)]
        spec: PathBuf,
    },
    /// Graph utilities.
    #[command(subcommand)]
    Graph(GraphCommand),
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    /// Node and edge counts after loading.
    Stats(Box<ConfigArgs>),
    /// Write a synthetic undirected social-circle edge list.
    Generate {
        #[arg(long, default_value_t = 4039)]
        nodes: usize,
        #[arg(long, default_value_t = 88234)]
        edges: usize,
        #[arg(long, default_value_t = 10)]
        circles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Dip,
    Fixed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SourceArg {
    Fast,
    Base,
}

/// Flags shared by every command; each overrides the config file.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Edge list, optionally gzipped.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Treat each line as an undirected edge.
    #[arg(long)]
    pub undirected: bool,
    /// `wc` or `uniform:<p>`.
    #[arg(long)]
    pub weighting: Option<Weighting>,
    /// `weibull:<shape>,<scale>`, `deterministic:<v>` or `exponential:<rate>`.
    #[arg(long, value_parser = config::parse_delay)]
    pub delay: Option<DelayDist>,
    #[arg(long)]
    pub trigger_count: Option<usize>,
    #[arg(long)]
    pub trigger_frac: Option<f64>,
    #[arg(long)]
    pub activate_count: Option<usize>,
    #[arg(long)]
    pub activate_frac: Option<f64>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// A number or `1/n`.
    #[arg(long)]
    pub delta: Option<Delta>,
    /// Spacing of candidate speedup times.
    #[arg(long)]
    pub grid: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub sample_cap: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = v; } )* };
        }
        macro_rules! take_opt {
            ($($f:ident),*) => { $( if self.$f.is_some() { c.$f = self.$f.clone(); } )* };
        }
        take!(
            weighting,
            delay,
            rate,
            horizon,
            epsilon,
            delta,
            seed,
            runs,
            max_iterations,
            sample_cap
        );
        take_opt!(
            graph,
            trigger_count,
            trigger_frac,
            activate_count,
            activate_frac,
            grid,
            workers,
            out
        );
        c.undirected |= self.undirected;
        Ok(c)
    }
}

fn load(cfg: &RunConfig) -> Result<tapdip_core::Graph, CliError> {
    let start = Instant::now();
    let g = cfg.load_graph()?;
    log::info!(
        "loaded {} nodes, {} edges in {:.2?}",
        g.node_count(),
        g.edge_count(),
        start.elapsed()
    );
    Ok(g)
}

/// Runs one command, writing its output to `--out` or stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = args.resolve()?;
            let g = load(&cfg)?;
            let r = tapdip_core::with_workers(cfg.workers, || commands::solve(&cfg, &g))?;
            report::emit(&report::to_json(&r), cfg.out.as_deref())
        }
        Command::BaseTap { cfg: args, compare } => {
            let cfg = args.resolve()?;
            let g = load(&cfg)?;
            let mut r = tapdip_core::with_workers(cfg.workers, || commands::base_tap(&cfg, &g))?;
            if let Some(path) = compare {
                let (fast_seeds, _) = commands::read_seed_file(&path)?;
                r = commands::with_overlap(r, &fast_seeds);
            }
            report::emit(&report::to_json(&r), cfg.out.as_deref())
        }
        Command::Simulate {
            cfg: args,
            seeds,
            mode,
            speedup_at,
            source,
        } => {
            let cfg = args.resolve()?;
            let (ids, inferred) = commands::read_seed_file(&seeds)?;
            let g = load(&cfg)?;
            let nodes = commands::resolve_seeds(&g, &ids)?;
            let mode = match mode {
                ModeArg::Dip => commands::SimulateMode::Dip,
                ModeArg::Fixed => commands::SimulateMode::Fixed { speedup_at },
            };
            let source = match source {
                Some(SourceArg::Fast) => Some(report::SeedSource::Fast),
                Some(SourceArg::Base) => Some(report::SeedSource::Base),
                None => inferred,
            };
            let r = tapdip_core::with_workers(cfg.workers, || {
                commands::simulate(&cfg, &g, &nodes, mode, source)
            })?;
            report::emit(&report::to_json(&r), cfg.out.as_deref())
        }
        Command::Sweep {
            cfg: args,
            rates,
            trigger_counts,
            activate_counts,
        } => {
            let cfg = args.resolve()?;
            let g = load(&cfg)?;
            let n = g.node_count();
            let rates = if rates.is_empty() {
                vec![cfg.rate]
            } else {
                rates
            };
            let triggers = if trigger_counts.is_empty() {
                vec![cfg.trigger_required(n)?]
            } else {
                trigger_counts
            };
            let activations = if activate_counts.is_empty() {
                vec![cfg.activation_required(n)?]
            } else {
                activate_counts
            };
            let rows = tapdip_core::with_workers(cfg.workers, || {
                commands::sweep(&cfg, &g, &rates, &triggers, &activations)
            })?;
            report::emit(&commands::sweep_csv(&rows), cfg.out.as_deref())
        }
        Command::Mtap { cfg: args, spec } => {
            let cfg = args.resolve()?;
            let entries = commands::read_threshold_file(&spec)?;
            let g = load(&cfg)?;
            let specs = commands::threshold_specs(&g, &entries)?;
            let r = tapdip_core::with_workers(cfg.workers, || commands::mtap(&cfg, &g, &specs))?;
            report::emit(&report::to_json(&r), cfg.out.as_deref())
        }
        Command::Graph(GraphCommand::Stats(args)) => {
            let cfg = args.resolve()?;
            let g = load(&cfg)?;
            let r = report::StatsReport {
                schema: report::SCHEMA,
                command: "graph-stats".into(),
                stats: g.stats(),
            };
            report::emit(&report::to_json(&r), cfg.out.as_deref())
        }
        Command::Graph(GraphCommand::Generate {
            nodes,
            edges,
            circles,
            seed,
            out,
        }) => {
            if circles == 0 || nodes < 2 * circles || edges > nodes * (nodes - 1) / 2 {
                return Err(CliError::Config(format!(
                    "cannot place {edges} edges in {circles} circles over {nodes} nodes"
                )));
            }
            let g = synth::social_circles(nodes, edges, circles, seed);
            let mut text = String::new();
            for e in g.edges().iter().filter(|e| e.src < e.dst) {
                text.push_str(&format!("{} {}\n", e.src.0, e.dst.0));
            }
            report::emit(&text, out.as_deref())
        }
    }
}
