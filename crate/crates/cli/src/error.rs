use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation failed at {field}: {source}")]
    Validation {
        field: String,
        #[source]
        source: qcorr::Error,
    },

    #[error("validation failed: {0}")]
    Check(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] qcorr::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) | CliError::Io(_) => 1,
            CliError::Validation { .. } | CliError::Check(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub(crate) fn at(field: impl Into<String>) -> impl FnOnce(qcorr::Error) -> CliError {
        let field = field.into();
        move |source| CliError::Validation { field, source }
    }
}
