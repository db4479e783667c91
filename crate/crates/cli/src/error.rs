use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config, or input data.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<bwht_core::Error> for CliError {
    fn from(e: bwht_core::Error) -> Self {
        match e {
            bwht_core::Error::State(_) => CliError::Internal(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}
