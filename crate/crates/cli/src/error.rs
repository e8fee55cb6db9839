use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The config could not be read or decoded.
    #[error("cannot read config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    /// A requested percentile rate does not exist for any split.
    #[error("unattainable percentile: {0}")]
    Unattainable(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Engine(iabrate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 3,
            CliError::Invalid(_) => 4,
            CliError::Unattainable(_) => 5,
            CliError::Io(_) | CliError::Csv(_) | CliError::Engine(_) => 1,
        }
    }
}

impl From<iabrate::Error> for CliError {
    fn from(e: iabrate::Error) -> Self {
        match e {
            iabrate::Error::Config(msg) => CliError::Invalid(msg),
            other => CliError::Engine(other),
        }
    }
}
