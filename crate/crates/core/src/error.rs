use std::path::PathBuf;

/// Errors produced anywhere in the engine.
///
/// Every variant maps to a stable process exit code via [`Error::exit_code`],
/// so the CLI can report failures by category.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A rendered query was in the wrong mode for the requested operation.
    #[error("mode error: {0}")]
    Mode(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// All rewards in a group were identical, so the group carries no signal.
    #[error("degenerate group: all {0} rewards are equal")]
    DegenerateGroup(usize),

    #[error("empty batch: no informative groups remain after filtering")]
    EmptyBatch,

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("unknown config key `{key}` at line {line}, column {column}")]
    UnknownKey { key: String, line: usize, column: usize },

    #[error("config type mismatch at line {line}, column {column}: {message}")]
    ConfigType { message: String, line: usize, column: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("parse error in {} at line {line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) => 2,
            Error::Mode(_) => 3,
            Error::Numeric(_) => 4,
            Error::DegenerateGroup(_) => 5,
            Error::EmptyBatch => 6,
            Error::CorruptCheckpoint(_) => 7,
            Error::UnknownKey { .. } => 8,
            Error::ConfigType { .. } => 9,
            Error::Config(_) => 10,
            Error::MissingFile(_) => 11,
            Error::Parse { .. } => 12,
            Error::Io(_) => 13,
            Error::Json(_) => 14,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
