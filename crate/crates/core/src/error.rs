use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Gram matrix too ill-conditioned to invert. Carries the reciprocal
    /// 1-norm condition number (0 when Cholesky broke down).
    #[error("singular Gram matrix (reciprocal condition number {rcond:e})")]
    Singular { rcond: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("codebook parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("codebook was built for statistical CSI {expected}, got {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by user input (config, codebook files, arguments)
    /// rather than by the computation itself.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::ConfigSyntax { .. }
            | Error::Validation { .. }
            | Error::FingerprintMismatch { .. } => true,
            Error::Context { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
