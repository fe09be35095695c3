use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] branchpde::Error),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0} kernel check(s) failed")]
    KernelChecks(usize),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 0 success, 1 IO or failed checks, 2 validation, 3 budget.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Csv(_) | CliError::KernelChecks(_) => 1,
            CliError::Core(branchpde::Error::BudgetExceeded(_)) => 3,
            CliError::Parse(_) | CliError::Invalid(_) | CliError::Core(_) => 2,
        }
    }
}
