use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} = {value} is outside its domain ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("singular input: {0}")]
    Singular(String),

    #[error("unphysical state: {0}")]
    Physicality(String),

    #[error("integration failed at t = {t_last}: {reason}")]
    Integration { t_last: f64, reason: String },

    #[error("need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("value {value} at tau_q = {tau} cannot be log-transformed")]
    NonLoggable { tau: f64, value: f64 },

    #[error("outside regime: {0}")]
    Regime(String),

    #[error("unknown observable `{0}`")]
    UnknownObservable(String),

    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain { what, value, expected }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
