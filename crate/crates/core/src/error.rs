use thiserror::Error;

/// Errors produced by indexing, retrieval, search and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate doc_id in corpus: {0}")]
    DuplicateDocId(String),

    #[error("unknown doc_id: {0}")]
    UnknownDocId(String),

    #[error("unknown query id: {0}")]
    UnknownQueryId(String),

    #[error("{path}:{line}: malformed line: {reason}")]
    MalformedLine {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("duplicate entry for query {qid}, doc {doc_id}")]
    DuplicateEntry { qid: String, doc_id: String },

    #[error("query {qid}: ranks not contiguous from 1 (expected {expected}, found {found})")]
    NonContiguousRanks {
        qid: String,
        expected: usize,
        found: usize,
    },

    #[error("empty feedback list: relevance model is undefined")]
    EmptyFeedback,

    #[error("candidate vocabulary is empty: no explanation possible")]
    EmptyCandidateVocabulary,

    #[error("black box returned an empty list for query {0}")]
    EmptyTargetList(String),

    #[error("query {qid}: black box returned documents absent from the corpus: {}", missing.join(", "))]
    TargetDocsMissing { qid: String, missing: Vec<String> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("failed to decode index artifact: {0}")]
    IndexArtifact(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
