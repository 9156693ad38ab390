use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
///
/// The variants are grouped so that front ends can map them onto exit codes:
/// input/config problems, numerical failures, and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("singular system in {context} (condition estimate {condition:.3e})")]
    Singular { context: &'static str, condition: f64 },

    #[error("output unit {unit}: {source}")]
    Unit {
        unit: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("statistics: {0}")]
    Stats(#[from] crate::stats::StatsError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from a numerical breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Unit { source, .. } => source.is_numeric(),
            e => matches!(e, Error::Numeric(_) | Error::Singular { .. } | Error::Shape(_)),
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            Error::Unit { source, .. } => source.is_io(),
            e => matches!(e, Error::Io { .. }),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
