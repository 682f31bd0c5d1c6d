use thiserror::Error;

#[derive(Debug, Error)]
pub enum CopaError {
    #[error("no such preset `{name}`; valid presets: {}", valid.join(", "))]
    UnknownPreset { name: String, valid: Vec<String> },

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("invalid design: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("missing inputs in {dir}: {}", missing.join(", "))]
    MissingInputs { dir: String, missing: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CopaError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        CopaError::Contract(msg.into())
    }
}

pub type Result<T, E = CopaError> = std::result::Result<T, E>;
