//! `cmfl` — committee-mechanism federated learning simulator.
//!
//! Subcommands: `run` (one simulation), `preset` (packaged experiments),
//! `sweep` (α/ω/ε grid), `report` (summarize artifacts), `gen-data`
//! (write a reusable synthetic dataset). Exit codes: 0 ok, 2 config error,
//! 3 run abort, 4 I/O error.

use clap::{Args, Parser, Subcommand};
use cmfl::cli::{
    apply_overrides, cmd_gen_data, cmd_preset, cmd_report, cmd_run, cmd_sweep, parse_run_spec,
    parse_scheme, Overrides, Preset, RunSpec,
};
use cmfl::error::Result;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "cmfl",
    version,
    about = "Committee-mechanism federated learning simulator"
)]
struct CliArgs {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by `run` and `sweep` that override config-file values.
#[derive(Args, Clone)]
struct CommonOverrides {
    /// Flat key=value config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Total number of clients.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Number of global rounds.
    #[arg(long = "T")]
    rounds: Option<usize>,
    /// Local SGD steps per round.
    #[arg(long)]
    tau: Option<usize>,
    /// Activation percentage of all clients.
    #[arg(long)]
    activation: Option<f64>,
    /// Aggregation-set percentage of activated clients.
    #[arg(long)]
    alpha: Option<f64>,
    /// Committee percentage of activated clients.
    #[arg(long)]
    omega: Option<f64>,
    /// Malicious percentage of all clients.
    #[arg(long)]
    epsilon: Option<f64>,
    /// fedavg | cmfl-i | cmfl-ii | median | trimmed-mean | krum | multi-krum.
    #[arg(long)]
    strategy: Option<String>,
    /// none | scaling | same-value | back-gradient.
    #[arg(long)]
    attack: Option<String>,
    /// Base RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl CommonOverrides {
    fn resolve(&self, collect_theory: bool, export_scores: bool) -> Result<RunSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    cmfl::error::Error::Io(std::io::Error::new(
                        e.kind(),
                        format!("{}: {e}", path.display()),
                    ))
                })?;
                parse_run_spec(&text, &path.display().to_string())?
            }
            None => RunSpec::defaults(),
        };
        let o = Overrides {
            k: self.k,
            rounds: self.rounds,
            tau: self.tau,
            activation: self.activation,
            alpha: self.alpha,
            omega: self.omega,
            epsilon: self.epsilon,
            strategy: self.strategy.clone(),
            attack: self.attack.clone(),
            seed: self.seed,
            collect_theory,
            export_scores,
        };
        apply_overrides(&mut spec, &o)?;
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute one simulation and write its artifacts.
    Run {
        #[command(flatten)]
        common: CommonOverrides,
        /// Output directory for config echo, metrics, roles, and snapshot.
        #[arg(long, default_value = "cmfl-out")]
        out: PathBuf,
        /// Collect the theory trace and, under a theorem-decay lr, write
        /// theory.csv + theory-report.txt.
        #[arg(long)]
        collect_theory: bool,
        /// Export per-round score tables as CSV.
        #[arg(long)]
        export_scores: bool,
    },
    /// Run a packaged experiment: normal-training, robustness,
    /// hyperparam-sweep, or committee-analysis.
    Preset {
        /// Preset name.
        name: String,
        /// Output directory; the preset writes into a subdirectory named
        /// after itself.
        #[arg(long, default_value = "cmfl-out")]
        out: PathBuf,
        /// Comma-separated seeds (default 1,2,3,4,5).
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Sweep an (alpha, omega, epsilon) grid from a base config.
    Sweep {
        #[command(flatten)]
        common: CommonOverrides,
        /// Comma-separated aggregation percentages.
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        /// Comma-separated committee percentages.
        #[arg(long, value_delimiter = ',', required = true)]
        omegas: Vec<f64>,
        /// Comma-separated malicious percentages.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        /// Comma-separated seeds (default 1,2,3,4,5).
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value = "cmfl-out")]
        out: PathBuf,
    },
    /// Summarize the artifacts in a run/preset directory.
    Report {
        /// Directory holding metrics/summary/sweep/theory CSVs.
        dir: PathBuf,
    },
    /// Generate a synthetic dataset and write partitions.txt + holdout.txt.
    GenData {
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        /// Samples generated per class (before the holdout split).
        #[arg(long = "per-class", default_value_t = 150)]
        per_class: usize,
        #[arg(long, default_value_t = 3.0)]
        separation: f64,
        #[arg(long = "holdout-per-class", default_value_t = 50)]
        holdout_per_class: usize,
        /// Number of client partitions.
        #[arg(long = "K", default_value_t = 100)]
        k: usize,
        /// iid | label-shard:N | dirichlet:conc.
        #[arg(long, default_value = "label-shard:1")]
        scheme: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "cmfl-data")]
        out: PathBuf,
    },
}

fn dispatch(cli: CliArgs) -> Result<String> {
    match cli.cmd {
        Cmd::Run {
            common,
            out,
            collect_theory,
            export_scores,
        } => {
            let spec = common.resolve(collect_theory, export_scores)?;
            cmd_run(&spec, &out)
        }
        Cmd::Preset { name, out, seeds } => {
            let preset: Preset = name.parse()?;
            cmd_preset(preset, &out, &seeds)
        }
        Cmd::Sweep {
            common,
            alphas,
            omegas,
            epsilons,
            seeds,
            out,
        } => {
            let spec = common.resolve(false, false)?;
            let seeds = if seeds.is_empty() {
                cmfl::cli::DEFAULT_PRESET_SEEDS.to_vec()
            } else {
                seeds
            };
            cmd_sweep(&spec, &alphas, &omegas, &epsilons, &seeds, &out)
        }
        Cmd::Report { dir } => cmd_report(&dir),
        Cmd::GenData {
            classes,
            dim,
            per_class,
            separation,
            holdout_per_class,
            k,
            scheme,
            seed,
            out,
        } => {
            let scheme = parse_scheme("--scheme", &scheme)?;
            cmd_gen_data(
                classes,
                dim,
                per_class,
                separation,
                holdout_per_class,
                k,
                scheme,
                seed,
                &out,
            )
        }
    }
}

fn main() {
    let cli = CliArgs::parse();
    match dispatch(cli) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
