use thiserror::Error;

/// Errors raised by model construction, the numerical engines and the simulator.
///
/// Numerical context is reported as `f64` regardless of the scalar type in use.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {what} (got {value})")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("conditional price undefined: q({bid}) = 0")]
    UndefinedConditional { bid: f64 },

    #[error("integration failed at t = {t_stop}: {reason}")]
    Integration { t_stop: f64, reason: String },

    #[error("invalid bracket [{a}, {b}]: {reason}")]
    InvalidBracket { a: f64, b: f64, reason: String },

    #[error("bisection inconsistency at iteration {iteration}: {reason}")]
    Inconsistency { iteration: usize, reason: String },

    #[error("trajectory escaped at t = {t_stop} before the requested age {t}")]
    Escaped { t: f64, t_stop: f64 },

    #[error("mode error: {0}")]
    Mode(String),

    #[error("divergent integral: {0}")]
    Divergence(String),

    #[error("degenerate competition: {0}")]
    Degenerate(String),

    #[error("quadrature failed on [{a}, {b}]: {reason}")]
    Quadrature { a: f64, b: f64, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: impl Into<f64>) -> Self {
        Error::Domain {
            what,
            value: value.into(),
        }
    }

    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integration { .. }
                | Error::InvalidBracket { .. }
                | Error::Inconsistency { .. }
                | Error::Escaped { .. }
                | Error::Divergence(_)
                | Error::Degenerate(_)
                | Error::Quadrature { .. }
                | Error::UndefinedConditional { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
