use thiserror::Error;

/// Failure classes with their process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Classifies a library error raised while computing.
    pub fn from_compute(err: dirac_chimera::Error, context: &str) -> Self {
        use dirac_chimera::Error as E;
        match err {
            E::Io(e) => CliError::Io(format!("{context}: {e}")),
            E::InvalidConfig(_) | E::Geometry(_) => CliError::Validation(format!("{context}: {err}")),
            other => CliError::Numerical(format!("{context}: {other}")),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
