//! `contagion` command-line tool.
//!
//! Every subcommand reads one JSON config (`hawkes`, `market`, `utility`),
//! takes one seed and writes plot-ready CSV or JSON into one output
//! directory. Each artifact gets a `.meta.json` sidecar recording the
//! resolved config, the options and the tool version.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad config, flag value or input shape. Exit code 2.
    Validation(String),
    /// Numerical or I/O failure after validation. Exit code 1.
    Runtime(String),
}

impl From<contagion::Error> for CliError {
    fn from(e: contagion::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "contagion", version, about = "Portfolio choice under mutually exciting jump contagion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// JSON file with `hawkes`, `market` and `utility` sections.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Worker threads for Monte Carlo ensembles. Outputs do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate market paths under the log-optimal feedback policy.
    Simulate(commands::SimulateArgs),
    /// Optimal policy at one intensity vector and over an intensity grid.
    Policy(commands::PolicyArgs),
    /// Value function on an intensity grid with diagnostics.
    Value(commands::ValueArgs),
    /// Characteristic function of the intensity system: ODE against Monte Carlo.
    Charfn(commands::CharfnArgs),
    /// Detect jumps in a return series and filter intensities.
    Filter(commands::FilterArgs),
    /// Stationary mean and a long-run ergodic check.
    Moments(commands::MomentsArgs),
    /// Two-class scenario: intensities, class weights and prices over time.
    Scenario(commands::ScenarioArgs),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate(a) => &a.common,
            Command::Policy(a) => &a.common,
            Command::Value(a) => &a.common,
            Command::Charfn(a) => &a.common,
            Command::Filter(a) => &a.common,
            Command::Moments(a) => &a.common,
            Command::Scenario(a) => &a.common,
        }
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let common = cli.command.common().clone();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    let cfg = RunConfig::load(&common.config)?;
    match &cli.command {
        Command::Simulate(a) => commands::simulate(&cfg, a),
        Command::Policy(a) => commands::policy(&cfg, a),
        Command::Value(a) => commands::value(&cfg, a),
        Command::Charfn(a) => commands::charfn(&cfg, a),
        Command::Filter(a) => commands::filter(&cfg, a),
        Command::Moments(a) => commands::moments(&cfg, a),
        Command::Scenario(a) => commands::scenario(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(files) => {
            // A closed pipe on stdout is not a failure of the run.
            let mut stdout = std::io::stdout().lock();
            for f in files {
                if writeln!(stdout, "{}", f.display()).is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
