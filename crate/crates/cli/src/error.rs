use std::fmt;

use negmargin_core::Error;

/// Failure of a CLI run, mapped to a stable exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration file, override or flag combination.
    Config(String),
    Core(Error),
}

impl CliError {
    /// | code | meaning |
    /// |------|---------|
    /// | 2 | configuration or usage error |
    /// | 3 | I/O error |
    /// | 4 | numeric failure (divergence, non-finite values) |
    /// | 5 | malformed input file |
    /// | 6 | contract violation (invalid data for the requested operation) |
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(Error::Io { .. }) => 3,
            CliError::Core(Error::Numeric(_)) => 4,
            CliError::Core(Error::Format { .. } | Error::Parse { .. }) => 5,
            CliError::Core(Error::Contract(_)) => 6,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}
