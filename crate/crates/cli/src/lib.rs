//! Command-line driver: `steady`, `simulate`, `dichotomy` and `verify`.
//!
//! [`run`] takes the argument list and returns the process exit code:
//! 0 on success, 1 when an identity check or the scheme fails, 2 for bad
//! flags, config files or parameters outside the model's domain.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod report;
pub mod scan;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::error::{CliError, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "aggdiff",
    version,
    about = "Energy-critical aggregation-diffusion lab"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate the steady state and check its integral identities.
    Steady(SteadyArgs),
    /// Integrate one initial datum.
    Simulate(SimulateArgs),
    /// Run a list of steady-state multiples and compare with the prediction.
    Dichotomy(DichotomyArgs),
    /// Run the full acceptance suite for one parameter pair.
    Verify(VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Steady(_) => "steady",
            Command::Simulate(_) => "simulate",
            Command::Dichotomy(_) => "dichotomy",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Clone, Args, Default)]
pub struct ModelArgs {
    /// Space dimension (>= 3).
    #[arg(long)]
    pub d: Option<usize>,
    /// Interaction order, 1 < s < d/2.
    #[arg(long)]
    pub s: Option<f64>,
    /// Steady-state scale [default: 1].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Outer radius of the grid [default: 60].
    #[arg(long)]
    pub rmax: Option<f64>,
    /// Number of radial cells [default: 512].
    #[arg(long)]
    pub n: Option<usize>,
    /// Kernel regularization [default: 0].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// `key = value` file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory [default: .].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct RunArgs {
    /// Final time [default: 5].
    #[arg(long)]
    pub tend: Option<f64>,
    /// CFL number in (0, 1) [default: 0.4].
    #[arg(long)]
    pub cfl: Option<f64>,
    /// Time-step floor that counts as blow-up [default: 1e-10 x first step].
    #[arg(long)]
    pub dtfloor: Option<f64>,
    /// Sup-norm threshold that counts as blow-up [default: see README].
    #[arg(long)]
    pub linfmax: Option<f64>,
    /// Diagnostic row every this many steps [default: 10].
    #[arg(long)]
    pub sample_every: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SteadyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Start from kappa times the calibrated steady state.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Start from a Gaussian of this amplitude (needs --gaussian-width).
    #[arg(long)]
    pub gaussian_amplitude: Option<f64>,
    #[arg(long)]
    pub gaussian_width: Option<f64>,
    /// Start from cell values read from a CSV file (`u` or `r,u` per line).
    #[arg(long)]
    pub init_file: Option<PathBuf>,
    /// Keep a full profile every this many diagnostic rows [default: 50].
    #[arg(long)]
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DichotomyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated steady-state multiples.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub kappas: Option<Vec<f64>>,
    /// Multiples with |kappa - 1| below this are not scored [default: 0.05].
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let name = cli.command.name();
    let result = match cli.command {
        Command::Steady(a) => commands::steady(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Dichotomy(a) => commands::dichotomy(&a),
        Command::Verify(a) => commands::verify(&a),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            if let CliError::Usage(_) = err {
                let mut cmd = Cli::command();
                cmd.build();
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    eprintln!("\n{}", sub.render_usage());
                }
                eprintln!("\nFor more information, try '--help'.");
            }
            err.exit_code()
        }
    }
}
