use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pwolff::verifier::config::load_config;
use pwolff::verifier::report::{execute, Command};

/// Pointwise Wolff-potential bounds for the parabolic p-Laplacian with measure data.
#[derive(Parser, Debug)]
#[command(name = "pwolff", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Directory for CSV and summary output.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Run only this refinement rung (0-based).
    #[arg(long, global = true)]
    rung: Option<usize>,
    /// Seed recorded in the summary; only randomized suites consume it.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Solve every scenario and dump the fields.
    Solve { config: PathBuf },
    /// Evaluate Wolff potentials at the configured points and queries.
    Wolff { config: PathBuf },
    /// Trace the level construction at every verification point.
    KmTrace { config: PathBuf },
    /// Full check: bracket, level construction and refinement study.
    Verify { config: PathBuf },
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (command, config) = match cli.command {
        Cmd::Solve { config } => (Command::Solve, config),
        Cmd::Wolff { config } => (Command::Wolff, config),
        Cmd::KmTrace { config } => (Command::KmTrace, config),
        Cmd::Verify { config } => (Command::Verify, config),
    };
    let scenarios = load_config(&config)?;
    let outcome = execute(command, &scenarios, &cli.out, cli.rung, cli.seed).with_context(|| format!("running {}", config.display()))?;
    print!("{}", outcome.summary);
    Ok(outcome.success())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
