use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

/// Shifted inverse curvature flows of horo-convex surfaces in H³.
#[derive(Debug, Parser)]
#[command(name = "horoflow", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Assert the built-in checks for the subcommand; exit 4 if any fails.
    #[arg(long, global = true)]
    pub check: bool,
    /// Seed override for sampled computations.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the flow described by the [surface], [flow] and [output] sections.
    Simulate,
    /// Exact round solution: existence time and a trajectory table.
    Spherical(commands::SphericalArgs),
    /// Curvature rate and horo-convexity window of the quartic half-space patch.
    Counterexample(commands::CounterexampleArgs),
    /// Sampled certification of curvature-function structure flags.
    CurvfunCheck(commands::CurvfunArgs),
    /// Support-function route against the radial-graph route.
    SupportCheck(commands::SupportArgs),
    /// Independent simulations over a parameter grid, run concurrently.
    Sweep,
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Check(Vec<String>),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Check(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical event: {m}"),
            CliError::Check(failed) => write!(f, "{} check(s) failed: {}", failed.len(), failed.join("; ")),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<horoflow::Error> for CliError {
    fn from(e: horoflow::Error) -> Self {
        use horoflow::Error as E;
        match e {
            E::HoroConvexityLost { .. } | E::Numerical(_) => CliError::Numerical(e.to_string()),
            E::Io(_) | E::Csv(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("horoflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
