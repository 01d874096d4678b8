//! `urnfield` command-line front end.
//!
//! [`run`] parses arguments, executes one subcommand and returns the process
//! exit code, so tests can drive the binary in-process.

mod commands;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use urnfield::UrnError;

pub use output::{Manifest, OutputDigest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONDITION: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "urnfield",
    version,
    about = "Interacting urns with strong reinforcement"
)]
pub struct Cli {
    /// Master seed for stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; a manifest is written next to it. Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for parallel commands.
    #[arg(long, global = true, env = "URNFIELD_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the mean-field vector field on a grid.
    Field(commands::FieldArgs),
    /// Locate and classify the zeros of the vector field.
    Equilibria(commands::EquilibriaArgs),
    /// Solve for u_m and its stability margin.
    Um(commands::UmArgs),
    /// Solve for the equilibrium s_m.
    Sm(commands::SmArgs),
    /// Simulate a single trajectory.
    Simulate(commands::SimulateArgs),
    /// Run a Monte Carlo ensemble from a JSON config.
    Mc(commands::ConfigArgs),
    /// Scan domination frequency over p from a JSON config.
    Scan(commands::ConfigArgs),
    /// Check summability and variation conditions of a sequence.
    CheckW(commands::CheckWArgs),
    /// Two-sample test of the embedded and discrete urn laws.
    EmbedTest(commands::EmbedTestArgs),
}

#[derive(Debug)]
pub enum CliError {
    Core(UrnError),
    Io(std::io::Error),
    Condition(String),
}

impl From<UrnError> for CliError {
    fn from(e: UrnError) -> Self {
        match e {
            UrnError::Io(io) => CliError::Io(io),
            other => CliError::Core(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(UrnError::Parse(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Condition(_) => EXIT_CONDITION,
            CliError::Core(e) => match e {
                UrnError::ConditionViolation(_) => EXIT_CONDITION,
                UrnError::Io(_) => EXIT_IO,
                UrnError::Internal(_) => EXIT_INTERNAL,
                UrnError::InvalidArgument(_)
                | UrnError::Domain(_)
                | UrnError::NotFound(_)
                | UrnError::Parse(_) => EXIT_USAGE,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
            CliError::Condition(msg) => write!(f, "condition violation: {msg}"),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Parse `args` (including the program name) and execute; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if cli.threads == Some(0) {
        let _ = writeln!(stderr, "error: --threads must be at least 1");
        return EXIT_USAGE;
    }
    configure_threads(cli.threads);
    match commands::execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
