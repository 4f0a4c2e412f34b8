//! `hybridlv`: configuration-driven runs of the pricing and calibration engine.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "hybridlv", version, about = "Local volatility with Hull-White rates: PDE, closed form, Monte Carlo and calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve the P·Z density and write snapshots and mass diagnostics.
    SolvePde(Common),
    /// Call prices from the evolved density.
    PricePde(Common),
    /// Closed-form Black-Scholes / Hull-White prices and sensitivities.
    PriceAnalytic(Common),
    /// Monte Carlo call prices with standard errors.
    PriceMc(Common),
    /// Corrective-term curves over the configured maturities.
    CorrectiveTerms(Common),
    /// Bootstrap a local-vol surface from a call surface.
    Calibrate(Common),
    /// Join two price tables and report the discrepancies.
    Compare(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Input(String),
    Numerical(hybridlv::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Input(_) => "input",
            CliError::Numerical(_) => "numerical",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Input(_) => 4,
            CliError::Numerical(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Input(m) => f.write_str(m),
            CliError::Numerical(e) => write!(f, "{e}"),
        }
    }
}

impl From<hybridlv::Error> for CliError {
    fn from(e: hybridlv::Error) -> Self {
        CliError::Numerical(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::SolvePde(c) => ("solve-pde", c),
        Command::PricePde(c) => ("price-pde", c),
        Command::PriceAnalytic(c) => ("price-analytic", c),
        Command::PriceMc(c) => ("price-mc", c),
        Command::CorrectiveTerms(c) => ("corrective-terms", c),
        Command::Calibrate(c) => ("calibrate", c),
        Command::Compare(c) => ("compare", c),
    };
    match commands::run(name, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({
                "error": e.kind(),
                "command": name,
                "message": e.to_string(),
            });
            eprintln!("{line}");
            ExitCode::from(e.exit_code())
        }
    }
}
