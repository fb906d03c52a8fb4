//! `snm`: trace generation, LRU simulation, analytic models, trace fitting
//! and the reference experiment presets from one command line.

mod commands;
mod output;
mod presets;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use snm_core::SnmError;

use output::Format;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "snm", version, about = "Shot-noise traffic and LRU cache experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Output directory.
    #[arg(long, global = true, env = "SNM_OUT_DIR", default_value = "snm-out")]
    pub out: PathBuf,
    /// Base seed; overrides the seed of a config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Independent simulation runs (0 skips simulation where it is optional).
    #[arg(long, global = true, default_value_t = 3)]
    pub reps: usize,
    /// Divides the content arrival rate and every cache capacity. Presets
    /// pick their own default when omitted.
    #[arg(long, global = true)]
    pub scale: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a request trace from a traffic config.
    Generate(commands::GenerateArgs),
    /// Simulate LRU caches on generated traces or on a trace file.
    Simulate(commands::SimulateArgs),
    /// Evaluate the analytic model for a single cache or a cache tree.
    Solve(commands::SolveArgs),
    /// Fit a multi-class traffic config to a trace.
    Fit(commands::FitArgs),
    /// Required cache size after shuffling requests within time slices.
    ShuffleStudy(commands::ShuffleArgs),
    /// Run a reference experiment preset.
    Sweep {
        #[arg(value_enum)]
        preset: Preset,
    },
    /// Hit probability against cache size for several life-spans and volume exponents.
    Fig6,
    /// Six-class mixes with plain and filtered LRU.
    Fig7,
    /// Capacity allocation in an eight-leaf tree.
    Fig8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig6,
    Fig7,
    Fig8,
}

#[derive(Serialize)]
struct ErrorReport {
    error: &'static str,
    message: String,
    exit_code: u8,
}

fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    match err.chain().find_map(|e| e.downcast_ref::<SnmError>()) {
        Some(e) if e.is_numerical() => ("numerical", EXIT_NUMERICAL),
        Some(_) => ("config", EXIT_CONFIG),
        None => ("config", EXIT_CONFIG),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let common = cli.common;
    match cli.command {
        Command::Generate(args) => commands::generate(&common, &args),
        Command::Simulate(args) => commands::simulate(&common, &args),
        Command::Solve(args) => commands::solve(&common, &args),
        Command::Fit(args) => commands::fit(&common, &args),
        Command::ShuffleStudy(args) => commands::shuffle_study(&common, &args),
        Command::Sweep { preset } => presets::run(&common, preset),
        Command::Fig6 => presets::run(&common, Preset::Fig6),
        Command::Fig7 => presets::run(&common, Preset::Fig7),
        Command::Fig8 => presets::run(&common, Preset::Fig8),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (kind, code) = classify(&err);
            let report = ErrorReport { error: kind, message: format!("{err:#}"), exit_code: code };
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| format!("{err:#}")));
            ExitCode::from(code)
        }
    }
}
