use std::fmt;
use std::process::ExitCode;

/// Failure of a command, carrying the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, flags or input files (exit 1).
    Validation(String),
    /// Training or evaluation broke down while running (exit 2).
    Runtime(String),
    /// A checked invariant or an integrity check failed (exit 3).
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Invariant(_) => 3,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "runtime failure: {m}"),
            CliError::Invariant(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<irbm::data::DataError> for CliError {
    fn from(e: irbm::data::DataError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<irbm::training::TrainError> for CliError {
    fn from(e: irbm::training::TrainError) -> Self {
        use irbm::training::TrainError as T;
        match e {
            T::Config(_) | T::MissingLabels => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<irbm::evaluation::EvalError> for CliError {
    fn from(e: irbm::evaluation::EvalError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<irbm::ModelError> for CliError {
    fn from(e: irbm::ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}
