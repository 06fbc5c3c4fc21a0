use std::fmt;

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed configuration.
    Usage(String),
    /// A numerical contract was violated.
    Numeric(quasicorr::Error),
    /// A sum oracle found no decomposition.
    Oracle { target: Vec<i64> },
    /// One or more verification checks failed.
    Checks(Vec<String>),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numeric(_) | CliError::Checks(_) => 2,
            CliError::Oracle { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numeric(e) => write!(f, "numeric error: {e}"),
            CliError::Oracle { target } => write!(f, "oracle failure: no Bragg decomposition for target {target:?}"),
            CliError::Checks(names) => write!(f, "failed checks: {}", names.join(", ")),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<quasicorr::Error> for CliError {
    fn from(e: quasicorr::Error) -> Self {
        use quasicorr::Error as E;
        match e {
            E::OracleFailure { target } => CliError::Oracle { target },
            E::UnknownPreset(_) | E::InvalidWindow(_) | E::Parse(_) => CliError::Usage(e.to_string()),
            other => CliError::Numeric(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
