//! Command-line driver: synthesize or ingest recipes, build staged dialog
//! data, train the toy model stage by stage, evaluate and ablate inputs.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

mod commands;
pub mod error;
pub mod manifest;
pub mod pipeline;

use clap::{Parser, Subcommand};

pub use commands::train::TrainFile;
pub use error::{CliError, EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
pub use manifest::{read_manifest, FileDigest, RunManifest};

/// Caps the worker threads used for decoding and scoring.
pub const THREADS_ENV: &str = "RECIPE_FORGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "recipe-forge", version, about = "Staged recipe-generation training and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a deterministic synthetic recipe corpus.
    Synth(commands::data::SynthArgs),
    /// Validate a recipe file, join a visual sidecar and report rejects.
    Ingest(commands::data::IngestArgs),
    /// Turn recipes into dialog examples for one training stage.
    BuildData(commands::data::BuildDataArgs),
    /// Write a freshly initialized model checkpoint.
    Init(commands::train::InitArgs),
    /// Train one stage of the toy model.
    Train(commands::train::TrainArgs),
    /// Decode a dialog file and score it.
    Eval(commands::eval::EvalArgs),
    /// Score instruction generation under different input combinations.
    AblateInputs(commands::eval::AblateArgs),
    /// Compare the metrics with brute-force versions and hand-computed values.
    OracleCheck(commands::oracle::OracleArgs),
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>, CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| CliError::usage(format!("cannot start {n} threads: {e}")))
}

/// Parses `args` (including the program name) and runs the command,
/// returning a JSON summary.
pub fn run<I, T>(args: I) -> Result<serde_json::Value, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        use clap::error::ErrorKind;
        let code = match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
            _ => EXIT_USAGE,
        };
        CliError {
            code,
            message: e.render().to_string(),
        }
    })?;
    let exec = move || match cli.command {
        Command::Synth(a) => commands::data::synth(a),
        Command::Ingest(a) => commands::data::ingest(a),
        Command::BuildData(a) => commands::data::build_data(a),
        Command::Init(a) => commands::train::init(a),
        Command::Train(a) => commands::train::train(a),
        Command::Eval(a) => commands::eval::eval(a),
        Command::AblateInputs(a) => commands::eval::ablate(a),
        Command::OracleCheck(a) => commands::oracle::oracle_check(a),
    };
    match thread_pool()? {
        Some(pool) => pool.install(exec),
        None => exec(),
    }
}
