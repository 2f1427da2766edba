use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate passage id {id:?} in {path}")]
    DuplicatePassageId { path: PathBuf, id: String },

    #[error("empty corpus: cannot build an index without passages")]
    EmptyCorpus,

    #[error("unknown passage {0:?}")]
    UnknownPassage(String),

    #[error("no index available for corpus {0:?}")]
    MissingIndex(String),

    #[error("index at {path} is unreadable: {message}")]
    CorruptIndex { path: PathBuf, message: String },

    #[error("reference string needs {needed} tokens but grounding budget is {budget}")]
    ReferenceOverBudget { needed: usize, budget: usize },

    #[error("record {id:?}: {message}")]
    Record { id: String, message: String },

    #[error("{}", describe_mismatch(without_reference, without_summary))]
    IdMismatch {
        /// Generated-summary ids with no reference.
        without_reference: Vec<String>,
        /// Reference ids with no generated summary.
        without_summary: Vec<String>,
    },

    #[error("remote scorer: {0}")]
    Remote(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn record(id: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Record {
            id: id.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by how the tool was invoked or configured, as
    /// opposed to problems in the data it was pointed at.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidArgument(_))
    }
}

fn describe_mismatch(without_reference: &[String], without_summary: &[String]) -> String {
    let mut parts = Vec::new();
    if !without_reference.is_empty() {
        parts.push(format!("generated ids without a reference: {without_reference:?}"));
    }
    if !without_summary.is_empty() {
        parts.push(format!(
            "reference ids without a generated summary: {without_summary:?}"
        ));
    }
    parts.join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
