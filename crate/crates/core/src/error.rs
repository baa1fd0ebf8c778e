use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("solver fault at t = {time}: {reason}")]
    SolverFault {
        time: f64,
        reason: String,
        last_finite: Vec<f64>,
    },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("ensemble has {got} members, at least {need} required")]
    EnsembleTooSmall { got: usize, need: usize },

    #[error("certificate refused: {0}")]
    Refused(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
