use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the analysis pipeline can report.
///
/// Variant names double as the machine-readable error codes exposed by the
/// HTTP service and the CLI (see [`Error::code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("unreadable stream: {0}")]
    UnreadableStream(String),
    #[error("corpus contains no parseable messages")]
    EmptyCorpus,
    #[error("schema map references missing column `{0}`")]
    MissingColumn(String),
    #[error("invalid schema map: {0}")]
    InvalidSchema(String),
    #[error("invalid address `{0}`")]
    InvalidAddress(String),
    #[error("synthetic body pool is empty")]
    EmptyPool,
    #[error("unknown format `{0}`")]
    UnknownFormat(String),
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("unknown document `{0}`")]
    UnknownDoc(String),
    #[error("invalid term `{0}`")]
    InvalidTerm(String),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("filter already present: {0}")]
    DuplicateFilter(String),
    #[error("unknown filter `{0}`")]
    UnknownFilter(String),
    #[error("query stack targets dataset `{stack}` but index is `{index}`")]
    DatasetMismatch { stack: String, index: String },
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("malformed action log at line {line}: {reason}")]
    MalformedLog { line: usize, reason: String },
    #[error("replay diverged at seq {seq}: {reason}")]
    ReplayDivergence { seq: u64, reason: String },
    #[error("result set is empty")]
    EmptyResults,
    #[error("tag label is empty")]
    EmptyLabel,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown edge {{{0}, {1}}}")]
    UnknownEdge(String, String),
    #[error("no removals to undo")]
    EmptyUndoStack,
    #[error("invalid cluster count {k} for {docs} documents")]
    InvalidK { k: usize, docs: usize },
    #[error("cluster index {index} out of range for k={k}")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("session has no clustering")]
    NoClustering,
    #[error("clustering {docs} documents exceeds the cap of {cap}")]
    ClusterCapExceeded { docs: usize, cap: usize },
    #[error("storage failure at {path}: {reason}")]
    StorageFailure { path: PathBuf, reason: String },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnreadableStream(_) => "UnreadableStream",
            Error::EmptyCorpus => "EmptyCorpus",
            Error::MissingColumn(_) => "MissingColumn",
            Error::InvalidSchema(_) => "InvalidSchema",
            Error::InvalidAddress(_) => "InvalidAddress",
            Error::EmptyPool => "EmptyPool",
            Error::UnknownFormat(_) => "UnknownFormat",
            Error::DuplicateDocId(_) => "DuplicateDocId",
            Error::UnknownDoc(_) => "UnknownDoc",
            Error::InvalidTerm(_) => "InvalidTerm",
            Error::InvalidFilter(_) => "InvalidFilter",
            Error::DuplicateFilter(_) => "DuplicateFilter",
            Error::UnknownFilter(_) => "UnknownFilter",
            Error::DatasetMismatch { .. } => "DatasetMismatch",
            Error::UnknownDataset(_) => "UnknownDataset",
            Error::UnknownSession(_) => "UnknownSession",
            Error::MalformedLog { .. } => "MalformedLog",
            Error::ReplayDivergence { .. } => "ReplayDivergence",
            Error::EmptyResults => "EmptyResults",
            Error::EmptyLabel => "EmptyLabel",
            Error::UnknownNode(_) => "UnknownNode",
            Error::UnknownEdge(..) => "UnknownEdge",
            Error::EmptyUndoStack => "EmptyUndoStack",
            Error::InvalidK { .. } => "InvalidK",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::NoClustering => "NoClustering",
            Error::ClusterCapExceeded { .. } => "ClusterCapExceeded",
            Error::StorageFailure { .. } => "StorageFailure",
        }
    }

    pub(crate) fn storage(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::StorageFailure {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}
