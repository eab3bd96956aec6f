//! Batch driver: every simulation and fit in the toolkit as a reproducible
//! run. A run is a subcommand plus a JSON config; identical config and seed
//! give byte-identical outputs regardless of thread count.
//!
//! Exit codes: 0 success, 2 configuration error, 3 flagged-invalid physics
//! result, 1 anything else.

mod commands;
mod config;

use anyhow::Result;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "iongate",
    about = "Trapped-ion optical-qubit gate simulation and calibration runs"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config value: dotted.path=json (repeatable).
    #[arg(long = "set", global = true)]
    set: Vec<String>,
    /// Output directory (overrides config.output; default "run-out").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Root RNG seed (overrides config.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = automatic; never affects results).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// 2D population map over MS-interaction parameters.
    MsScan,
    /// Gate + parity scan + maximum-likelihood Bell fidelity.
    MsParity,
    /// Excitation spectroscopy across the carrier, with/without the cavity.
    Spectrum,
    /// Plain Ramsey contrast curve.
    Ramsey,
    /// Magnetic-field dynamic-decoupling contrast curve.
    Mfdd,
    /// Hahn-echo contrast curve.
    Echo,
    /// Micromotion-sideband / carrier register flopping traces.
    Address,
    /// Simulate a fluorescence photon-count histogram.
    ReadoutSim,
    /// Invert a histogram back to register populations.
    ReadoutFit,
    /// Print the AOM frequency chain table (and drift corrections).
    FreqTable,
    /// Recover a frequency offset between a measured and a calculated map.
    CalibrateLightshift,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::MsScan => "ms-scan",
            Command::MsParity => "ms-parity",
            Command::Spectrum => "spectrum",
            Command::Ramsey => "ramsey",
            Command::Mfdd => "mfdd",
            Command::Echo => "echo",
            Command::Address => "address",
            Command::ReadoutSim => "readout-sim",
            Command::ReadoutFit => "readout-fit",
            Command::FreqTable => "freq-table",
            Command::CalibrateLightshift => "calibrate-lightshift",
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("--config is required"))?;
    let (mut cfg, mut snapshot) = config::load(config_path, &cli.set)?;

    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        snapshot["seed"] = serde_json::json!(seed);
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    if let Some(expected) = &cfg.scenario {
        if expected != cli.command.name() {
            anyhow::bail!(
                "config is for scenario {expected:?} but the {} subcommand was invoked",
                cli.command.name()
            );
        }
    }
    snapshot["scenario"] = serde_json::json!(cli.command.name());

    if cfg.threads > 0 {
        // ignore failure when a pool already exists (tests call run() twice)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global();
    }

    let out_dir = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("run-out"));
    let ctx = commands::RunContext::new(out_dir, snapshot);

    match cli.command {
        Command::MsScan => commands::ms_scan(&cfg, ctx),
        Command::MsParity => commands::ms_parity(&cfg, ctx),
        Command::Spectrum => commands::spectrum(&cfg, ctx),
        Command::Ramsey => commands::ramsey(&cfg, ctx),
        Command::Mfdd => commands::mfdd(&cfg, ctx),
        Command::Echo => commands::echo(&cfg, ctx),
        Command::Address => commands::address(&cfg, ctx),
        Command::ReadoutSim => commands::readout_sim(&cfg, ctx),
        Command::ReadoutFit => commands::readout_fit(&cfg, ctx),
        Command::FreqTable => commands::freq_table(&cfg, ctx),
        Command::CalibrateLightshift => commands::calibrate_lightshift(&cfg, ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<commands::PhysicsFlag>().is_some() {
                ExitCode::from(3)
            } else if err.is::<std::io::Error>() {
                ExitCode::from(1)
            } else {
                // configuration and validation problems
                ExitCode::from(2)
            }
        }
    }
}
