//! `cmfp`: command-line driver for the compressive matched-field library.
//! Every subcommand reads the same JSON config.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or usage error,
//! 3 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::Target;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<cmfp_core::Error> for CliError {
    fn from(e: cmfp_core::Error) -> Self {
        use cmfp_core::Error as E;
        match e {
            E::Io(_) | E::Cache(_) => CliError::Io(e.to_string()),
            e if e.is_config_error() => CliError::Config(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "cmfp", version, about = "Compressive matched-field processing in a Pekeris waveguide")]
struct Cli {
    /// JSON run configuration; every block is optional.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build and cache replica fields and compressed encoders.
    Precompute,
    /// Localize one synthetic or recorded observation.
    Localize {
        /// Observation CSV (`freq_hz,element,re,im`); overrides the config.
        #[arg(long, value_name = "PATH")]
        observations: Option<PathBuf>,
    },
    /// Run a named Monte Carlo study.
    Study {
        #[arg(value_enum)]
        name: StudyName,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StudyName {
    Tail,
    Lobe,
    Mismatch,
    Tracking,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let target = match &cli.command {
        Command::Precompute => Target::Precompute,
        Command::Localize { .. } => Target::Localize,
        Command::Study { name } => match name {
            StudyName::Tail => Target::Tail,
            StudyName::Lobe => Target::Lobe,
            StudyName::Mismatch => Target::Mismatch,
            StudyName::Tracking => Target::Tracking,
        },
    };
    let mut raw = config::load(cli.config.as_deref())?;
    if let Command::Localize { observations: Some(p) } = &cli.command {
        raw.localize.observations_csv = Some(p.clone());
    }
    let resolved = raw.resolve(target, cli.seed, cli.out.as_deref())?;
    if cli.dry_run {
        println!("{}", serde_json::to_string_pretty(&resolved).expect("resolved config serializes"));
        return Ok(());
    }
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    match target {
        Target::Precompute => commands::precompute(&resolved),
        Target::Localize => commands::localize(&resolved),
        _ => commands::study(&resolved),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
