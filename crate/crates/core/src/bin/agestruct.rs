use std::path::PathBuf;
use std::process::ExitCode;

use agestruct::scenario::{parse_config, run, Command, RunOptions};
use clap::{Parser, Subcommand};

/// Environment variable naming the output directory when neither the flag
/// nor the config sets one.
const OUTPUT_DIR_ENV: &str = "AGESTRUCT_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "agestruct-out";

#[derive(Parser)]
#[command(
    name = "agestruct",
    version,
    about = "Age-structured population scenarios and verification checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Directory for timeseries.csv, report.json and other artifacts.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Overrides the seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppresses the summary and warnings.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the nonlinear model and run the checks listed in the config.
    Simulate { config: PathBuf },
    /// A priori bounds on the scalar compartments and their margins along the run.
    Bounds { config: PathBuf },
    /// Characteristic roots of the frozen bounding systems and the conservation check.
    Spectral { config: PathBuf },
    /// Sandwich between frozen bounds, monotone pairs and monotone iterations.
    Compare { config: PathBuf },
    /// Interior/boundary region of the initial state and its persistence.
    Invariance { config: PathBuf },
    /// Sampled check of the order assumptions of the general model.
    Probe { config: PathBuf },
    /// Grid refinement study at n_cells * 2^k.
    Convergence {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let (path, command) = match &cli.command {
        Cmd::Simulate { config } => (config, Command::Simulate),
        Cmd::Bounds { config } => (config, Command::Bounds),
        Cmd::Spectral { config } => (config, Command::Spectral),
        Cmd::Compare { config } => (config, Command::Compare),
        Cmd::Invariance { config } => (config, Command::Invariance),
        Cmd::Probe { config } => (config, Command::Probe),
        Cmd::Convergence { config, levels } => (config, Command::Convergence { levels: *levels }),
    };

    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let mut scenario = match parse_config(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    let output_dir = cli
        .output_dir
        .clone()
        .or_else(|| scenario.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let opts = RunOptions {
        output_dir,
        quiet: cli.quiet,
    };
    match run(&scenario, command, &opts) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
