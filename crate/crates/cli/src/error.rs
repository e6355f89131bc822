use thiserror::Error;

/// CLI failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file contents, or incompatible combinations.
    #[error("config error: {0}")]
    Config(String),

    /// Unreadable, malformed, or inconsistent input or output files.
    #[error("{0}")]
    Data(sgbm_core::Error),

    /// NaN or infinite loss during training.
    #[error("{0}")]
    Numeric(sgbm_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<sgbm_core::Error> for CliError {
    fn from(err: sgbm_core::Error) -> Self {
        use sgbm_core::Error as E;
        match err {
            E::Numeric(_) => CliError::Numeric(err),
            E::Validation(msg) => CliError::Config(msg),
            other => CliError::Data(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Wraps errors raised while reading input files, which are data problems
/// whatever their kind.
pub(crate) fn data_error(err: sgbm_core::Error) -> CliError {
    match err {
        sgbm_core::Error::Numeric(_) => CliError::Numeric(err),
        other => CliError::Data(other),
    }
}
