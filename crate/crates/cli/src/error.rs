use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Failures of the batch driver, grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    /// The config file is not valid JSON or does not match the schema.
    #[error("{path}: line {line}, column {column}: {message}")]
    ConfigSyntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    /// The config parses but describes an impossible scenario.
    #[error("invalid config: {0}")]
    Config(String),

    /// Input data (a flow dump) is malformed or inconsistent with the config.
    #[error("invalid input: {0}")]
    Input(String),

    /// The time stepper gave up.
    #[error("solver aborted: {0}")]
    Solver(String),

    /// A verification routine failed for a reason other than a residual
    /// exceeding its tolerance.
    #[error("verification error: {0}")]
    Verify(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// `2` for config, shape and input errors, `3` for solver aborts.
    /// Check failures are not errors and exit with `1` from the driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Classifies a core error raised while reading or checking a flow.
pub(crate) fn input_error(e: graflow_core::Error) -> CliError {
    use graflow_core::Error as E;
    match e {
        E::NonFinite { .. } | E::ShapeMismatch(_) | E::Csv(_) | E::TimeIndex { .. } => CliError::Input(e.to_string()),
        other => CliError::Verify(other.to_string()),
    }
}

/// Classifies a core error raised by the time stepper.
pub(crate) fn solver_error(e: graflow_core::Error) -> CliError {
    use graflow_core::Error as E;
    match e {
        E::Cfl { .. }
        | E::LinearSolve { .. }
        | E::GradientGuard { .. }
        | E::NonFinite { .. }
        | E::ForcingDomain { .. } => CliError::Solver(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}
