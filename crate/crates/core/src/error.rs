use thiserror::Error;

/// Failure to load or validate a problem instance.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("malformed JSON: {0}")]
    Parse(String),
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl ProblemError {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        ProblemError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invariant(message: impl Into<String>) -> Self {
        ProblemError::Invariant(message.into())
    }
}

/// Errors raised by the point-wise PK/PD formulas.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("unknown medicine `{0}`")]
    UnknownMedicine(String),
    #[error("unknown organ `{0}`")]
    UnknownOrgan(String),
    #[error("domain error: {0}")]
    Domain(String),
}
