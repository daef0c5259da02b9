use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] kaczmarz_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Name reported by the CLI on failure.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Core(e) => e.name(),
            Error::Io { .. } => "IoError",
            Error::Parse { .. } => "ParseError",
            Error::Csv(_) => "CsvError",
            Error::Invalid(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
