#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::config::RunConfig;

/// Two-source heralded-photon interference: models, Monte Carlo and dip fits.
#[derive(Debug, Parser)]
#[command(name = "hom", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration entry, e.g. `--set source.n_bar=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Root seed for Monte Carlo runs (overrides run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write CSV output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spectral, multi-pair and exact-model visibilities.
    Visibility,
    /// Exact and Monte Carlo fourfold counts over the delay grid.
    Dip,
    /// Fourfold rate and six-fold projections.
    Rates,
    /// Monte Carlo counts at the configured delay and far outside the dip.
    Montecarlo,
    /// Fit a dip to `delay_s,counts[,error]` data using the configured coupler.
    Fit {
        data: PathBuf,
        /// Residuals CSV; defaults to `<out>.residuals.csv` when --out is given.
        #[arg(long)]
        residuals: Option<PathBuf>,
    },
    /// Check 2/λ_p = 1/λ_s + 1/λ_i; exits with status 1 when it fails.
    EnergyCheck {
        #[arg(long, default_value_t = 708.0)]
        pump_nm: f64,
        #[arg(long, default_value_t = 583.0)]
        signal_nm: f64,
        #[arg(long, default_value_t = 900.0)]
        idler_nm: f64,
        /// Relative tolerance.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.set)?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    let mut out = output(cli.out.as_ref())?;
    let passed = match cli.command {
        Command::Visibility => commands::visibility(&cfg, &mut out).map(|_| true)?,
        Command::Dip => commands::dip(&cfg, &mut out).map(|_| true)?,
        Command::Rates => commands::rates(&cfg, &mut out).map(|_| true)?,
        Command::Montecarlo => commands::montecarlo(&cfg, &mut out).map(|_| true)?,
        Command::Fit { data, residuals } => {
            let residuals =
                residuals.or_else(|| cli.out.as_ref().map(|o| o.with_extension("residuals.csv")));
            commands::fit(&cfg, &data, residuals.as_deref(), &mut out).map(|_| true)?
        }
        Command::EnergyCheck {
            pump_nm,
            signal_nm,
            idler_nm,
            tol,
        } => commands::energy_check(pump_nm, signal_nm, idler_nm, tol, &mut out)?,
    };
    out.flush()?;
    Ok(passed)
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
