//! Command-line front end: `generate`, `train`, `eval` and `reject`.
//!
//! Every command resolves its settings from built-in defaults, then an
//! optional TOML file (`--config`, one table per command), then flags. The
//! resolved settings are echoed as `<command>.config.toml` next to the
//! outputs, and that file can be passed back with `--config` to repeat the
//! run.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

pub mod commands;
pub mod settings;

use std::ffi::OsString;
use std::fmt;

use clap::{Parser, Subcommand};

pub use commands::eval::{cmd_eval, EvalOutcome};
pub use commands::generate::cmd_generate;
pub use commands::reject::cmd_reject;
pub use commands::train::cmd_train;
pub use settings::{EvalSettings, GenerateSettings, ModelChoice, RejectSettings, TrainSettings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "evireg", version, about = "Evidential regression over multi-annotator labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-annotator dataset with known ground truth.
    Generate(settings::GenerateArgs),
    /// Train an evidential model or a baseline.
    Train(settings::TrainArgs),
    /// Score a checkpoint on a dataset.
    Eval(settings::EvalArgs),
    /// Reject-option curves from an evaluation's per-item predictions.
    Reject(settings::RejectArgs),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Runtime(err) => write!(f, "error: {err:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<evireg::Error> for CliError {
    fn from(err: evireg::Error) -> Self {
        match err {
            evireg::Error::Config(msg) => CliError::Usage(msg),
            other => CliError::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Runtime(err)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Runs a parsed command.
pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(&args.resolve()?).map(|_| ()),
        Command::Train(args) => cmd_train(&args.resolve()?).map(|_| ()),
        Command::Eval(args) => {
            let outcome = cmd_eval(&args.resolve()?)?;
            print!("{}", outcome.summary.to_tsv());
            Ok(())
        }
        Command::Reject(args) => cmd_reject(&args.resolve()?).map(|_| ()),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Help and version requests exit 0.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = err.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("{err}");
            err.exit_code()
        }
    }
}
