use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {reason}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("duplicate document id {id:?} (line {line})")]
    DuplicateId { id: String, line: usize },

    #[error("invalid document: {0}")]
    InvalidDocument(String),

    #[error("unknown section type {0:?}")]
    UnknownSectionType(String),

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("heading frequency table is empty")]
    EmptyTable,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("non-finite component at index {0}")]
    NonFinite(usize),

    #[error("cannot compute over an empty set of vectors")]
    EmptyInstances,

    #[error("embedding input text is empty")]
    EmptyInput,

    #[error("provider mismatch: expected {expected}, found {found}")]
    ProviderMismatch { expected: String, found: String },

    #[error("embedding provider failed for text key {key}: {reason}")]
    Provider { key: String, reason: String },

    #[error("corrupt embedding cache {path}: {reason}")]
    CorruptCache { path: PathBuf, reason: String },

    #[error("no section type has at least {min_members} seed instances")]
    NoQualifyingType { min_members: usize },

    #[error("retrofit aborted after {completed_documents} documents: {source}")]
    RetrofitAborted {
        completed_documents: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("histogram sets are not comparable: {0}")]
    Incomparable(String),

    #[error("gold label for ({doc_id}, {index}) has no matching prediction")]
    MissingPrediction { doc_id: String, index: usize },

    #[error("gold label set is empty")]
    EmptyGold,

    #[error("gold label {doc_id}/{index} is {gold}, which is not a valid gold type")]
    InvalidGold {
        doc_id: String,
        index: usize,
        gold: String,
    },

    #[error("missing artifact {path}: run `{stage}` first")]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
