use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown model `{name}` (valid: {valid})")]
    UnknownModel { name: String, valid: String },

    #[error("unknown chip `{name}` (valid: {valid})")]
    UnknownChip { name: String, valid: String },

    #[error("model `{model}` cannot use the {path} workload path")]
    WrongArchitecture { model: String, path: &'static str },

    #[error("invalid {what}: {reason}")]
    Domain { what: &'static str, reason: String },

    #[error("mapping constraint violated: {0}")]
    Constraint(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            what,
            reason: reason.into(),
        }
    }

    /// True for errors that describe an unservable deployment rather than bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_) | Error::Constraint(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
