use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ACCURACY: i32 = 2;
pub const EXIT_UNSTABLE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] hardy_core::Error),

    #[error("cli::config: {0}")]
    Config(String),

    #[error("cli::run: usage error: {0}")]
    Usage(String),

    #[error("cli::io: {0}: {1}")]
    Io(String, std::io::Error),

    #[error("cli::output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_accuracy() || matches!(e, hardy_core::Error::Overflow { .. }) => EXIT_ACCURACY,
            _ => EXIT_USAGE,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
