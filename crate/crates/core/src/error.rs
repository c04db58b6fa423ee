use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("invalid data: {0}")]
    Data(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("search space violation: {0}")]
    Space(String),
    #[error("memory budget exceeded: {0}")]
    Memory(String),
    #[error("lattice cache: {0}")]
    Cache(String),
}

impl Error {
    /// Process exit code for the CLI, one per error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Parse { .. } => 3,
            Error::Data(_) => 4,
            Error::Space(_) => 5,
            Error::Memory(_) => 6,
            Error::Cache(_) => 7,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
