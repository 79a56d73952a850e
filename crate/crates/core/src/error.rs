use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = EemError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EemError {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("line {line}: label {label:?} outside {{-1,0,+1}}")]
    InvalidLabel { line: usize, label: String },

    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("both classes required")]
    MissingClass,

    #[error("singular covariance; combined class covariance not invertible")]
    SingularCovariance,

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model is already collapsed")]
    AlreadyCollapsed,

    #[error("operation requires a Nystrom feature map")]
    NotNystrom,

    #[error("no configuration in the grid could be fitted")]
    NoViableConfig,

    #[error("model file: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EemError {
    /// True for failures caused by the numerics of the data (as opposed to
    /// malformed input or misuse).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            EemError::SingularCovariance | EemError::NonPositiveVariance(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        EemError::InvalidArgument(msg.into())
    }
}

impl From<serde_json::Error> for EemError {
    fn from(e: serde_json::Error) -> Self {
        EemError::ModelFile(e.to_string())
    }
}
