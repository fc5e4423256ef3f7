use thiserror::Error;

use dipolar_squeeze::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    /// 2 for configuration and capacity problems, 3 for numerical failures,
    /// 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(e) => match e {
                CoreError::InvalidArgument(_) | CoreError::InvalidGeometry(_) | CoreError::CapacityExceeded { .. } => 2,
                CoreError::Convergence(_)
                | CoreError::Integration(_)
                | CoreError::Fit(_)
                | CoreError::MapConstruction(_)
                | CoreError::Extrapolation { .. }
                | CoreError::UndefinedSqueezing(_) => 3,
            },
            CliError::Io { .. } => 1,
        }
    }
}
