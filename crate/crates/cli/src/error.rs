use std::fmt;

use interp_core::{DataError, EvaluationError, GenerationError, ModerationError, PromptError, SimilarityError};

/// Process exit status of a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Invalid data, configuration or a domain precondition.
    Domain = 1,
    Io = 2,
    /// The configured backend cannot do what was asked.
    Capability = 3,
    /// The external scoring service failed.
    External = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(kind: ExitKind, error: impl Into<anyhow::Error>) -> Self {
        CliError { kind, error: error.into() }
    }

    pub fn domain(msg: impl fmt::Display) -> Self {
        CliError::new(ExitKind::Domain, anyhow::anyhow!("{msg}"))
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }

    pub fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> Self {
        CliError { kind: self.kind, error: self.error.context(msg) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(ExitKind::Io, e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        let kind = if e.is_io() { ExitKind::Io } else { ExitKind::Domain };
        CliError::new(kind, e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        let kind = if e.is_io_error() { ExitKind::Io } else { ExitKind::Domain };
        CliError::new(kind, e)
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        let kind = if matches!(e, DataError::Io(_)) { ExitKind::Io } else { ExitKind::Domain };
        CliError::new(kind, e)
    }
}

impl From<GenerationError> for CliError {
    fn from(e: GenerationError) -> Self {
        let kind = match e {
            GenerationError::Capability { .. } => ExitKind::Capability,
            GenerationError::Io(_) => ExitKind::Io,
            _ => ExitKind::Domain,
        };
        CliError::new(kind, e)
    }
}

impl From<ModerationError> for CliError {
    fn from(e: ModerationError) -> Self {
        let kind = match e {
            ModerationError::Scoring { .. } | ModerationError::RetryExhausted { .. } => ExitKind::External,
            ModerationError::Io(_) => ExitKind::Io,
            _ => ExitKind::Domain,
        };
        CliError::new(kind, e)
    }
}

macro_rules! domain_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::new(ExitKind::Domain, e)
            }
        }
    )*};
}

domain_from!(EvaluationError, PromptError, SimilarityError);
