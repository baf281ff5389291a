use ashbm::Error;

/// Harness errors, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver breakdown: {0}")]
    Solver(String),

    #[error("{0}")]
    Inconsistent(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for configuration errors, 3 for solver breakdowns, 4 for inconsistent
    /// systems and 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Inconsistent(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

/// Whether a core error means the method itself broke down.
pub fn is_breakdown(e: &Error) -> bool {
    matches!(
        e,
        Error::Breakdown { .. } | Error::DegenerateDirection | Error::StalledSampling { .. } | Error::ZeroSketchResidual
    )
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(io) => CliError::Io(io),
            Error::InconsistentSystem { .. } => CliError::Inconsistent(e.to_string()),
            ref e if is_breakdown(e) => CliError::Solver(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}
