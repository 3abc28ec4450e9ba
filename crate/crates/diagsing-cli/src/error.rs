use std::fmt;

use crate::config::ConfigError;

/// Failure classes, one per process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Unreadable, malformed or invalid configuration.
    Config(String),
    /// A numerical invariant was breached or a check failed.
    Contract(String),
    /// A complex-plane computation was refused.
    Analyticity(String),
    /// Results could not be written.
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Contract(_) => 3,
            CliError::Analyticity(_) => 4,
            CliError::Output(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Contract(m) => write!(f, "contract violation: {m}"),
            CliError::Analyticity(m) => write!(f, "analyticity refusal: {m}"),
            CliError::Output(m) => write!(f, "output error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<diagsing::Error> for CliError {
    fn from(e: diagsing::Error) -> Self {
        use diagsing::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) | E::OutsideSegment { .. } | E::GridMismatch(_) | E::TimeBeyondMax { .. } => CliError::Config(msg),
            E::Analyticity { .. } => CliError::Analyticity(msg),
            _ => CliError::Contract(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
