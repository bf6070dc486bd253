use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use delaynet_cli::run::{EXIT_INVALID, EXIT_IO};
use delaynet_cli::{execute, load_scenario, LoadError, Mode, RunOptions};

#[derive(Parser)]
#[command(
    name = "delaynet",
    about = "Simulate and check coupled networks with delays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides the scenario's output.directory)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for certificate and assumption probes (overrides the scenario seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Do not print the JSON summary
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and run every configured check
    Run { scenario: PathBuf },
    /// Only probe the scenario's QUAD certificate
    CheckQuad { scenario: PathBuf },
    /// Validate a scenario file and its model assumptions
    Validate { scenario: PathBuf },
    /// Print the version
    Version,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, path) = match cli.command {
        Command::Version => {
            println!("delaynet {}", env!("CARGO_PKG_VERSION"));
            return ExitCode::SUCCESS;
        }
        Command::Run { scenario } => (Mode::Run, scenario),
        Command::CheckQuad { scenario } => (Mode::CheckQuad, scenario),
        Command::Validate { scenario } => (Mode::Validate, scenario),
    };
    let scenario = match load_scenario(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(match e {
                LoadError::Io { .. } => EXIT_IO,
                _ => EXIT_INVALID,
            });
        }
    };
    let opts = RunOptions {
        out: cli.out,
        seed: cli.seed,
    };
    match execute(&scenario, mode, &opts) {
        Ok(outcome) => {
            if !cli.quiet {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&outcome.summary).expect("summary serializes")
                );
            }
            ExitCode::from(outcome.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
