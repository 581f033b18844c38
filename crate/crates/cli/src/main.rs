//! `pme`: experiment runner around the solver crate.
//!
//! One JSON config per run; flags only pick the config file and output
//! directory. Exit codes: 0 all requested checks satisfied, 1 a check
//! failed, 2 config/environment error, 3 solver failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod io;

/// Run-aborting failure, as opposed to a check that ran and came out
/// unsatisfied (exit 1).
#[derive(Debug)]
pub enum Failure {
    /// Bad config or unusable environment (unwritable output dir).
    Config(String),
    /// Propagated solver error, tagged with module and operation.
    Solver(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(s) | Failure::Solver(s) => s,
        }
    }
}

#[derive(Parser)]
#[command(name = "pme", version, about = "Porous medium equation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the initial-boundary value problem and dump the field.
    Solve(RunArgs),
    /// Self-similar mass table and centerline profiles.
    Barenblatt(RunArgs),
    /// Upper/lower envelopes with the stagewise probe gap.
    Perron(RunArgs),
    /// Envelope gap across a (grid, smoothing) refinement ladder.
    Resolutivity(RunArgs),
    /// Run every applicable estimate checker and write a verdict table.
    VerifySuite(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

fn dispatch(cli: Cli) -> Result<bool, Failure> {
    let (name, args, run): (_, _, commands::Runner) = match cli.command {
        Command::Solve(a) => ("solve", a, commands::solve),
        Command::Barenblatt(a) => ("barenblatt", a, commands::barenblatt),
        Command::Perron(a) => ("perron", a, commands::perron),
        Command::Resolutivity(a) => ("resolutivity", a, commands::resolutivity),
        Command::VerifySuite(a) => ("verify-suite", a, commands::verify_suite),
    };
    let cfg = config::load(&args.config)?;
    cfg.expect_command(name)?;
    let raw = config::raw_bytes(&args.config)?;
    let mut sink = io::Sink::new(&args.out, name, &raw, &cfg)?;
    let ok = run(&cfg, &mut sink)?;
    sink.finish()?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("pme: one or more checks unsatisfied");
            ExitCode::from(1)
        }
        Err(f) => {
            eprintln!("pme: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
