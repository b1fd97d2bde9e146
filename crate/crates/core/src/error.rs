use thiserror::Error;

/// Errors produced by the solvers, the path algorithms and the file layer.
#[derive(Debug, Error)]
pub enum UotError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate iterate: {0}")]
    Degenerate(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("path cycling detected at lambda={lambda} with {active_len} active entries")]
    Cycling { lambda: f64, active_len: usize },

    #[error("invalid field `{field}`{}: {reason}", index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    Validation {
        field: String,
        index: Option<usize>,
        reason: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported format version {found} (this build reads version {supported})")]
    FormatVersion { found: u32, supported: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl UotError {
    pub(crate) fn validation(field: impl Into<String>, index: Option<usize>, reason: impl Into<String>) -> Self {
        UotError::Validation {
            field: field.into(),
            index,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = UotError> = std::result::Result<T, E>;
