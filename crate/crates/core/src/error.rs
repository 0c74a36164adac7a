use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Physics,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("{what} out of domain: {constraint}, got {value}")]
    Domain {
        what: &'static str,
        constraint: &'static str,
        value: f64,
    },

    #[error("signal input is zero; output phase is undefined")]
    ZeroSignal,

    #[error("detection config violates {violation}")]
    Detection { violation: String },

    #[error("records do not match: {0}")]
    RecordMismatch(String),

    #[error("no reference beat: cell-off 2δ amplitude {amplitude:e} below floor {floor:e}")]
    NoReferenceBeat { amplitude: f64, floor: f64 },

    #[error("no local oscillator: residual pump intensity is zero")]
    NoLocalOscillator,

    #[error("invalid scan: {0}")]
    Scan(String),

    #[error("config key `{key}`: expected {expected}, received {received}")]
    Config {
        key: String,
        expected: String,
        received: String,
    },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } | Error::Scan(_) | Error::Detection { .. } => {
                ErrorCategory::Config
            }
            Error::Io(_) | Error::Format(_) => ErrorCategory::Io,
            _ => ErrorCategory::Physics,
        }
    }

    pub(crate) fn config(
        key: impl Into<String>,
        expected: impl Into<String>,
        received: impl std::fmt::Display,
    ) -> Self {
        Error::Config {
            key: key.into(),
            expected: expected.into(),
            received: received.to_string(),
        }
    }
}

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what })
    }
}
