mod commands;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "coachres", version, about = "Coach reservation for group requests on a train")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance file, optionally with a sampled arrival sequence.
    Gen(GenArgs),
    /// Solve the offline problem (unconstrained and first-come first-serviced).
    Offline(OfflineArgs),
    /// Run online policies over seeded realizations and write traces and metrics.
    Simulate(SimulateArgs),
    /// Print the closed-form ratios and guarantees.
    Bounds(BoundsArgs),
    /// Summarize a results directory written by `simulate`.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct GenArgs {
    /// `shinkansen`, `shinkansen-mini` or a path to an instance file.
    #[arg(long, default_value = "shinkansen-mini")]
    pub builtin: String,
    /// Sample an arrival sequence with this seed and store it in the file.
    #[arg(long, env = "COACHRES_SEED")]
    pub seed: Option<u64>,
    /// Output path.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct OfflineArgs {
    /// `shinkansen`, `shinkansen-mini` or a path to an instance file.
    #[arg(long)]
    pub instance: String,
    /// Seed used to sample arrivals when the instance has none; also seeds
    /// the warm start.
    #[arg(long, env = "COACHRES_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Which problems to solve.
    #[arg(long, value_enum, default_value = "both")]
    pub mode: OfflineMode,
    /// Wall-clock limit per solve, in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub time_limit: f64,
    /// Branch-and-bound node limit per solve.
    #[arg(long, default_value_t = 50_000)]
    pub node_limit: usize,
    /// Enable the forward-filtering and dominance inequalities.
    #[arg(long)]
    pub extra_cuts: bool,
    /// Write the per-request models in LP format into this directory.
    #[arg(long)]
    pub dump_lp: Option<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OfflineMode {
    Plain,
    Fcfs,
    Both,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON experiment file; flags given here override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Experiment name, used as the results subdirectory.
    #[arg(long)]
    pub name: Option<String>,
    /// `shinkansen`, `shinkansen-mini` or a path to an instance file.
    #[arg(long)]
    pub instance: Option<String>,
    /// Comma-separated policies: FirstFit, RandomFit, ROM, AdaptiveROM,
    /// Lambda, Theta, Fluid, Fixed, FCFS, SFCFS.
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<String>>,
    /// Seeds as a list (`1,2,3`) or an inclusive range (`1..50`).
    #[arg(long)]
    pub seeds: Option<String>,
    /// First seed when `--seeds` is not given.
    #[arg(long, env = "COACHRES_SEED")]
    pub seed: Option<u64>,
    /// Number of seeds starting at `--seed`.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Results root directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Skip the offline optimum per seed.
    #[arg(long)]
    pub no_exact: bool,
}

#[derive(Args)]
pub struct BoundsArgs {
    /// Group fraction: largest group over coach capacity.
    #[arg(long, default_value_t = 0.06)]
    pub delta: f64,
    #[arg(long, default_value_t = 20)]
    pub coaches: usize,
    /// Seats per coach.
    #[arg(long, default_value_t = 100.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 4)]
    pub legs: usize,
    /// Scale of the offer probability.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Directory holding `metrics.json`.
    pub dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::Offline(a) => commands::offline(&a),
        Command::Simulate(a) => experiment::simulate(&a),
        Command::Bounds(a) => commands::bounds(&a),
        Command::Report(a) => experiment::report(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
