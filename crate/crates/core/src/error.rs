use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("payload size mismatch: expected {expected} bytes, found {found}")]
    SizeMismatch { expected: u64, found: u64 },

    #[error("value {value} outside [0, 1] in band {band} at pixel {pixel}")]
    Range { band: usize, pixel: usize, value: f32 },

    #[error("acquisition dates not strictly increasing at position {index}")]
    DateOrder { index: usize },

    #[error("invalid grid geometry: {0}")]
    Geometry(String),

    #[error("pixel ({row}, {col}) outside {height}x{width} grid")]
    Bounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("grids not aligned: {0}")]
    Alignment(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no positive pixels in sampling region")]
    NoPositives,

    #[error("insufficient negatives: {negatives} available for {positives} positives")]
    InsufficientNegatives { positives: usize, negatives: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("shape mismatch: model expects {expected} features, input has {found}")]
    Shape { expected: usize, found: usize },

    #[error("malformed model: tree {tree}, node {node}: {message}")]
    Model {
        tree: usize,
        node: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("curve undefined: {0}")]
    UndefinedCurve(String),

    #[error("invariant violated in {module}: {message}")]
    Invariant {
        module: &'static str,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn invariant(module: &'static str, message: impl Into<String>) -> Self {
        Error::Invariant {
            module,
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 2 for internal invariant violations,
    /// 1 for everything attributable to inputs or configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant { .. } => 2,
            _ => 1,
        }
    }
}
