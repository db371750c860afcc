//! Command-line front end: offline construction, simulation sweeps, bound
//! tables and instance generation.

mod commands;

pub use commands::{bounds_csv, build_report, sim_report, SimReport};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use dagsched_core::baselines::SchedulerKind;
use dagsched_core::json::DAG_SCHEMA_VERSION;
use dagsched_core::schedule::PLACEMENT_SCHEMA_VERSION;
use dagsched_core::sim::Fairness;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(
    name = "dagsched",
    about = "DAG-aware multi-resource cluster scheduling toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the preferred schedule of one DAG file.
    Build(BuildArgs),
    /// Simulate a random workload under one or more schedulers.
    Sim(SimArgs),
    /// Lower bounds for every DAG file in a directory.
    Bounds(BoundsArgs),
    /// Write a generated DAG as JSON.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    pub file: PathBuf,
    #[arg(long, default_value_t = 1, env = "DAGSCHED_MACHINES")]
    pub machines: usize,
    /// Treat every dimension as hard.
    #[arg(long)]
    pub no_overbook: bool,
    /// Also try ceilings above capacity on fungible dimensions.
    #[arg(long)]
    pub overbook_sweep: bool,
    /// Threshold grid step for choosing troublesome tasks.
    #[arg(long, default_value_t = 0.1, env = "DAGSCHED_DELTA")]
    pub delta: f64,
    /// Print the chosen troublesome/other/parent/child sets per part.
    #[arg(long)]
    pub dump_division: bool,
    /// Placement JSON path; defaults to `<file stem>.placements.json` beside the input.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FairnessArg {
    Slot,
    Drf,
}

impl From<FairnessArg> for Fairness {
    fn from(f: FairnessArg) -> Self {
        match f {
            FairnessArg::Slot => Fairness::Slot,
            FairnessArg::Drf => Fairness::Drf,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 20, env = "DAGSCHED_JOBS")]
    pub jobs: usize,
    /// Mean inter-arrival time in seconds.
    #[arg(long, default_value_t = 25.0, env = "DAGSCHED_ARRIVAL_MEAN")]
    pub arrival_mean: f64,
    #[arg(long, default_value_t = 10, env = "DAGSCHED_MACHINES")]
    pub machines: usize,
    #[arg(long, default_value_t = 2, env = "DAGSCHED_GROUPS")]
    pub groups: u32,
    /// Comma-separated scheduler names.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "graphene",
        env = "DAGSCHED_SCHEDULER"
    )]
    pub scheduler: Vec<SchedulerKind>,
    /// Comma-separated seeds; each seed draws its own workload.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1",
        env = "DAGSCHED_SEED"
    )]
    pub seed: Vec<u64>,
    #[arg(long, default_value_t = 0.1, env = "DAGSCHED_KAPPA")]
    pub kappa: f64,
    #[arg(long, value_enum, default_value_t = FairnessArg::Slot, env = "DAGSCHED_FAIRNESS")]
    pub fairness: FairnessArg,
    /// Weight of the remaining-work bias.
    #[arg(long = "m", default_value_t = 0.2, env = "DAGSCHED_M")]
    pub srpt_factor: f64,
    /// Remote penalty for locality-sensitive tasks off their preferred machine.
    #[arg(long, default_value_t = 0.8, env = "DAGSCHED_RP")]
    pub rp: f64,
    #[arg(long, default_value_t = 50)]
    pub eta_window: usize,
    #[arg(long)]
    pub heartbeat: Option<f64>,
    /// Relative spread of actual task durations around their estimates.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1.0)]
    pub ready_threshold: f64,
    #[arg(long)]
    pub no_overbook: bool,
    #[arg(long)]
    pub baseline_overbook: bool,
    #[arg(long, default_value_t = 8)]
    pub max_stages: usize,
    #[arg(long, default_value_t = 6)]
    pub max_tasks: usize,
    /// Fraction of tasks that prefer a machine.
    #[arg(long, default_value_t = 0.0)]
    pub locality: f64,
    /// Append rows here instead of printing them.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write every launch and task run as JSON.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

impl Default for SimArgs {
    fn default() -> Self {
        Cli::parse_from(["dagsched", "sim"])
            .command
            .into_sim()
            .expect("sim args")
    }
}

impl Command {
    fn into_sim(self) -> Option<SimArgs> {
        match self {
            Command::Sim(a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    pub dir: PathBuf,
    #[arg(long, default_value_t = 1, env = "DAGSCHED_MACHINES")]
    pub machines: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    TwoChain,
    BoundExample,
    CpAdv,
    PackerAdv,
    Blind,
    Random,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: GenKind,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 0, env = "DAGSCHED_SEED")]
    pub seed: u64,
    /// Number of random DAGs; more than one needs `--out` to be a directory.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid DAG {path}: {report}")]
    InvalidDag { path: String, report: String },
    #[error("{0} corpus files were skipped")]
    PartialCorpus(usize),
}

pub fn version_string() -> String {
    format!(
        "{} (dag schema {DAG_SCHEMA_VERSION}, placement schema {PLACEMENT_SCHEMA_VERSION})",
        env!("CARGO_PKG_VERSION")
    )
}

/// Parse process arguments; `--version` reports the file schema versions.
pub fn parse_args() -> Cli {
    let matches = Cli::command().version(version_string()).get_matches();
    Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit())
}

/// Exit status for a failed command: 2 for invalid input DAGs, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CliError>() {
        Some(CliError::InvalidDag { .. }) => 2,
        _ => 1,
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Build(a) => commands::build(&a),
        Command::Sim(a) => commands::sim(&a),
        Command::Bounds(a) => commands::bounds(&a),
        Command::Gen(a) => commands::gen(&a),
    }
}
