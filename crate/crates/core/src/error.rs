use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Divergence {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("model {model} failed: {source}")]
    Model {
        model: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// Process exit code for the command-line front end:
    /// 2 data/schema, 3 training divergence, 4 argument error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::Data(_) | Error::Parse(_) | Error::Io(_) | Error::Csv(_) => 2,
            Error::Divergence { .. } => 3,
            Error::Shape(_) | Error::Argument(_) | Error::Usage(_) => 4,
            Error::Model { source, .. } => source.exit_code(),
        }
    }
}
