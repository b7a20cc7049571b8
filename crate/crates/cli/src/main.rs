//! `bloch-plasmon`: batch driver for the quasi-periodic boundary-integral
//! solver. Every subcommand reads one TOML config (see `docs/config.md`),
//! writes CSV tables into the output directory and a short report to stdout.
//!
//! Exit codes: 0 success, 1 I/O, 2 invalid configuration, 3 numerical failure
//! (conditioning, Wood anomaly, failed identity checks), 4 infeasible design,
//! 5 sweep without enough valid points for a fit.

mod commands;
mod config;
mod verify;

use anyhow::Context;
use clap::{Parser, Subcommand};
use commands::{exit_code, Outcome};
use config::{Command, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "bloch-plasmon", version, about = "Plasmonic resonances of periodic inclusion arrays")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// TOML run configuration.
    config: PathBuf,
    /// Override a config value, e.g. `--set geometry.n=256`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Directory for CSV output (created if missing).
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// NP eigenvalues of the inclusion.
    Spectrum(Common),
    /// Transmission solve: densities, near field, energy, resonance report.
    Solve(Common),
    /// Pinned Drude blow-up sweep.
    Sweep(Common),
    /// Design tau or F onto an NP eigenvalue and verify the amplification.
    Design(Common),
    /// Identity battery (quasi-periodicity, Calderon, jump, coercivity, spectrum).
    Verify(Common),
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let (command, common) = match cli.command {
        Sub::Spectrum(c) => (Command::Spectrum, c),
        Sub::Solve(c) => (Command::Solve, c),
        Sub::Sweep(c) => (Command::Sweep, c),
        Sub::Design(c) => (Command::Design, c),
        Sub::Verify(c) => (Command::Verify, c),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let source = std::fs::read_to_string(&common.config).with_context(|| format!("reading {}", common.config.display()))?;
    let cfg = RunConfig::parse(&source, &common.overrides, command)?;
    let report = match command {
        Command::Spectrum => commands::spectrum(&cfg),
        Command::Solve => commands::solve(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Design => commands::design(&cfg),
        Command::Verify => commands::verify(&cfg),
    }?;
    let written = report.write(&common.output_dir)?;
    for line in &report.summary {
        println!("{line}");
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(report.outcome)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::InsufficientPoints) => ExitCode::from(5),
        Ok(Outcome::ChecksFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
