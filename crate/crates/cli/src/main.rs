//! `dkglab`: simulate, iterate, verify, map the parameter region and
//! evaluate space-time norms.
//!
//! Exit status: 0 on success, 2 when an exact claim is violated, 1 on any
//! usage or runtime error.

mod config;
mod norms;
mod output;
mod region;
mod simulate;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "dkglab",
    version,
    about = "Dirac-Klein-Gordon simulation and estimate toolkit"
)]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "dkglab-out")]
    out: PathBuf,
    /// Plain-text `key=value` file; flags win over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; falls back to DKGLAB_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve the half-wave system and write a trajectory with diagnostics.
    Simulate(simulate::SimulateArgs),
    /// Run the Picard iteration on the Duhamel system.
    Picard(simulate::PicardArgs),
    /// Run the exact and statistical estimate suites.
    Verify(verify::VerifyArgs),
    /// Scan the admissible (s, r) region and sweep the exponent solver.
    Region(region::RegionArgs),
    /// Evaluate space-time norms of a stored trajectory.
    Norms(norms::NormsArgs),
}

/// `Ok(true)`: success; `Ok(false)`: an exact claim failed.
fn run(cli: Cli) -> anyhow::Result<bool> {
    let mut resolver = config::Resolver::new(cli.config.as_deref())?;
    let seed = resolver.seed(cli.seed)?;
    let mut out = output::Output::new(&cli.out)?;
    if let Some(path) = &cli.config {
        out.add_input(path);
    }
    let (name, result) = match cli.command {
        Command::Simulate(args) => (
            "simulate",
            simulate::simulate(&args, &mut resolver, &mut out),
        ),
        Command::Picard(args) => ("picard", simulate::picard(&args, &mut resolver, &mut out)),
        Command::Verify(args) => (
            "verify",
            verify::verify(&args, &mut resolver, seed, &mut out),
        ),
        Command::Region(args) => ("region", region::region(&args, &mut resolver, &mut out)),
        Command::Norms(args) => ("norms", norms::norms(&args, &mut resolver, &mut out)),
    };
    // partial outputs of a failed run still get their manifest
    let error = result.as_ref().err().map(|e| format!("{e:#}"));
    if error.is_none() || out.has_outputs() {
        out.finish(name, resolver.echo, Some(seed), error)?;
    }
    result
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let usage = err.use_stderr();
            let _ = err.print();
            return if usage {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("dkglab: exact-claim violation, see the reports");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("dkglab: {err:#}");
            ExitCode::from(1)
        }
    }
}
