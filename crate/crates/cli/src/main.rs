//! `stale-momentum` command-line front end.
//!
//! Exit codes: 0 success or pass, 1 verification failure, 2 inconclusive,
//! 64 usage error, 65 domain error, 74 i/o error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use stale_momentum::verify::Status;
use stale_momentum::Exec;

use crate::commands::*;
use crate::config::{load_config, resolve, CliError, CliResult, EXIT_USAGE};
use crate::output::{Format, Sink};

const THREADS_ENV: &str = "STALE_MOMENTUM_THREADS";

#[derive(Parser, Debug)]
#[command(name = "stale-momentum", version, about = "Asynchronous SGD as momentum: staleness simulation, expectation checks and rate analysis")]
struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// JSON file with parameter values; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the worker queue and fit the staleness law.
    QueueSim(QueueSimFlags),
    /// Check an expectation identity or the queueing law.
    Verify(VerifyFlags),
    /// Iterates of one run or of the expected dynamics.
    Trajectory(TrajectoryFlags),
    /// Convergence rate from the growth polynomials.
    Rates(RatesFlags),
    /// Optimal explicit momentum per implicit momentum.
    Tune(TuneFlags),
    /// Tuned momentum against mu_l = 0 and mu_l = 0.5.
    Compare(CompareFlags),
    /// Hardware and statistical efficiency per worker count.
    Efficiency(EfficiencyFlags),
}

fn configure_threads() -> CliResult<Exec> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(Exec::Parallel);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    if n == 1 {
        return Ok(Exec::Sequential);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))?;
    Ok(Exec::Parallel)
}

fn global<T: serde::de::DeserializeOwned>(
    flag: Option<T>,
    config: &serde_json::Map<String, Value>,
    key: &str,
) -> CliResult<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    config
        .get(key)
        .map(|v| serde_json::from_value(v.clone()))
        .transpose()
        .map_err(|e| CliError::Usage(format!("invalid config key `{key}`: {e}")))
}

fn run(cli: Cli) -> CliResult<Status> {
    let config = load_config(cli.config.as_deref())?;
    let ctx = Context {
        seed: global(cli.seed, &config, "seed")?.unwrap_or(0),
        sink: Sink {
            dir: global(cli.out, &config, "out")?,
            format: global(cli.format, &config, "format")?.unwrap_or_default(),
        },
        exec: configure_threads()?,
    };
    match &cli.command {
        Command::QueueSim(f) => queue_sim(&ctx, &resolve(f, &config)?),
        Command::Verify(f) => verify(&ctx, &resolve(f, &config)?),
        Command::Trajectory(f) => trajectory(&ctx, &resolve(f, &config)?),
        Command::Rates(f) => rates(&ctx, &resolve(f, &config)?),
        Command::Tune(f) => tune_cmd(&ctx, &resolve(f, &config)?),
        Command::Compare(f) => compare(&ctx, &resolve(f, &config)?),
        Command::Efficiency(f) => efficiency(&ctx, &resolve(f, &config)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("stale-momentum: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
