//! `tmt`: closed-form sweeps and simulation campaigns for TMT networks.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::SimFlags;
use manifest::{Command, RunManifest, Sweep};

#[derive(Parser)]
#[command(
    name = "tmt",
    version,
    about = "Analytic and simulated completion times for TMT optical networks"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Configuration file (TOML with dotted keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset the config file is layered on: paper-numeric or paper-table1.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Grid sweep, e.g. load_x=0.1:0.9:0.1.
    #[arg(long, global = true)]
    sweep: Option<Sweep>,
    /// Traffic seeds per grid point (simulate) or graphs to average (epl).
    #[arg(long, global = true, default_value_t = 1)]
    seeds: usize,
    /// Write CSVs and a manifest here instead of printing to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Closed-form DCTs, optimal split and throughput per grid point.
    Analyze,
    /// Generate traffic, simulate it and compare with the closed form.
    Simulate {
        /// Release flows at their arrival times instead of all at t = 0.
        #[arg(long)]
        online: bool,
        /// Replay a flow trace CSV instead of generating traffic.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Optimal rotor / demand-aware switch split.
    Split,
    /// Large-flow size threshold.
    Threshold,
    /// Mean expected path length of random expanders.
    Epl,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut flags = SimFlags::default();
    let command = match cli.verb {
        Verb::Analyze => Command::Analyze,
        Verb::Simulate { online, trace } => {
            flags = SimFlags { online, trace };
            Command::Simulate
        }
        Verb::Split => Command::Split,
        Verb::Threshold => Command::Threshold,
        Verb::Epl => Command::Epl,
    };
    let c = cli.common;
    let config = commands::load_config(c.config.as_deref(), c.profile.as_deref())?;
    let manifest = RunManifest {
        command,
        config_path: c.config,
        config,
        sweep: c.sweep,
        seeds: c.seeds,
        out: c.out,
    };
    commands::run(&manifest, &flags)
}
