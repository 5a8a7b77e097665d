use hoss_core::Error;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("verification failed: {0}")]
    Verify(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Verify(_) => EXIT_VERIFY,
            CliError::Io(_) => EXIT_IO,
            CliError::Core(e) => match e {
                Error::Io(_) | Error::Corrupt(_) => EXIT_IO,
                Error::InvalidConfig(_)
                | Error::InvalidShape(_)
                | Error::ShapeMismatch { .. }
                | Error::BudgetExceeded { .. }
                | Error::DegenerateLabels(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            },
        }
    }
}

/// Attach the path to an I/O or format error.
pub fn with_path(path: &std::path::Path) -> impl FnOnce(Error) -> CliError + '_ {
    move |e| match e {
        Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        Error::Corrupt(msg) => CliError::Core(Error::Corrupt(format!("{}: {msg}", path.display()))),
        other => CliError::Core(other),
    }
}
