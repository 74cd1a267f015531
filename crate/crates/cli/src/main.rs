//! `chimera`: spin-resolved scattering and ray-dynamics pipelines for
//! eccentric annular gate junctions.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 I/O failure,
//! 3 numerical failure (non-convergence or too many failed points).

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Run;
use crate::config::{Format, RunConfig};
use crate::error::CliError;

/// Environment variable setting the worker count when `--workers` is absent.
const WORKERS_ENV: &str = "CHIMERA_WORKERS";

#[derive(Parser)]
#[command(name = "chimera", version, about = "Dirac-fermion scattering from eccentric annular gate junctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to $CHIMERA_WORKERS, then all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Override a config field, e.g. `--set junction.xi=0.25`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// S-matrices per energy and spin (JSON or binary).
    Smatrix,
    /// Wigner-Smith delay spectrum.
    Delay,
    /// Total, transport, directional and differential cross sections.
    Xsec,
    /// Energy-averaged spin polarization versus eccentricity.
    Polarization,
    /// Spin-resolved near-field densities on a grid.
    Nearfield,
    /// Ray-dynamics Poincare section in Birkhoff coordinates.
    Poincare,
    /// Delay map over energy and eccentricity.
    Sweep,
}

fn workers(flag: Option<usize>) -> Result<usize, CliError> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| CliError::Validation(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?,
            Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        },
    };
    if n == 0 {
        return Err(CliError::Validation("worker count must be positive".into()));
    }
    Ok(n)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli.config.ok_or_else(|| CliError::Validation("--config <path> is required".into()))?;
    let mut config = RunConfig::load(&path, &cli.overrides)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(format) = cli.format {
        config.format = Some(format);
    }
    config.validate()?;
    let workers = workers(cli.workers)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Validation(format!("worker pool: {e}")))?;
    let out = commands::output_dir(cli.out.as_deref(), &config);
    if let Some(dir) = &cli.out {
        config.out = Some(dir.display().to_string());
    }
    let format = config.format.unwrap_or(match cli.command {
        Command::Smatrix => Format::Json,
        _ => Format::Csv,
    });
    let run = Run { config, out, format, workers };
    match cli.command {
        Command::Smatrix => commands::smatrix(&run),
        Command::Delay => commands::delay(&run),
        Command::Xsec => commands::xsec(&run),
        Command::Polarization => commands::polarization(&run),
        Command::Nearfield => commands::nearfield(&run),
        Command::Poincare => commands::poincare(&run),
        Command::Sweep => commands::sweep(&run),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chimera: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
