//! `unravel`: runs trajectory ensembles, the analytic oracles, the steering
//! test and the `g²` analysis from one TOML configuration.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;
use crate::output::Outputs;

#[derive(Parser)]
#[command(name = "unravel", version, about = "Quantum trajectories of a driven two-level emitter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo ensemble under one unraveling.
    Simulate(RunArgs),
    /// Master equation, renewal route, moment hierarchy and its spectrum.
    Oracle(RunArgs),
    /// Steering functional for each configured efficiency.
    Steering(RunArgs),
    /// Coincidence histogram and model fit for two click streams.
    G2(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration, or the manifest.json of an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, replaces system.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override one key, e.g. `--set system.n_traj=2000`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Oracle(a) => ("oracle", a),
        Command::Steering(a) => ("steering", a),
        Command::G2(a) => ("g2", a),
    };
    let cfg = config::load(args.config.as_deref(), &args.set, args.seed)?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let mut out = Outputs::create(&args.out_dir)?;
    let details = match cli.command {
        Command::Simulate(_) => commands::simulate::run(&cfg, &mut out)?,
        Command::Oracle(_) => commands::oracle::run(&cfg, &mut out)?,
        Command::Steering(_) => commands::steering::run(&cfg, &mut out)?,
        Command::G2(_) => commands::g2::run(&cfg, &mut out)?,
    };
    let n_traj = match name {
        "simulate" => cfg.system.n_traj,
        "steering" => 2 * cfg.system.n_traj * cfg.steering.efficiencies.len(),
        _ => 0,
    };
    out.finish(name, &cfg, n_traj, details)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(manifest) => {
            eprintln!("wrote {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("unravel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
