use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    Shape { op: &'static str, left: Vec<usize>, right: Vec<usize> },
    #[error("{0}")]
    Invalid(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("non-finite {what} ({detail})")]
    NonFinite { what: String, detail: String },
    /// No question has both a positive and a negative candidate.
    #[error("no trainable questions: {0}")]
    EmptyTraining(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io(path.display().to_string(), err)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
