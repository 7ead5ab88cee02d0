use std::fmt;
use std::path::Path;

use recipe_forge::corpus::CorpusError;
use recipe_forge::metrics::MetricError;
use recipe_forge::promptkit::PromptError;
use recipe_forge::toylm::ToyLmError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// A failed command: the process exit code and a message for stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::data(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::ZeroDim | CorpusError::EmptySubset | CorpusError::SubsetTooLarge { .. } => {
                CliError::usage(e.to_string())
            }
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<ToyLmError> for CliError {
    fn from(e: ToyLmError) -> Self {
        match e {
            ToyLmError::Argument(_) | ToyLmError::Config(_) => CliError::usage(e.to_string()),
            ToyLmError::Numerical(_) | ToyLmError::NonFinite { .. } | ToyLmError::Loss(_) => {
                CliError::numerical(e.to_string())
            }
            ToyLmError::Checkpoint(_) | ToyLmError::Io { .. } => CliError::data(e.to_string()),
        }
    }
}
