use crate::types::ItemId;

/// Crate-wide error type.
///
/// Parse errors carry the 1-based line number of the offending CSV record so
/// callers can point users at the exact input row.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("{0}")]
    Invalid(String),

    #[error("empty training set: representation and propensity are undefined")]
    EmptyTrainingSet,

    #[error("item '{item}' is not in the catalog")]
    UnknownItem { item: ItemId },
}

impl Error {
    pub(crate) fn parse(line: u64, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
