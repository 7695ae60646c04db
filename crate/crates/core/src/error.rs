use thiserror::Error;

/// Errors raised by the model, controller and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// `1 + x2/gamma` vanished: the Arrhenius exponent is singular.
    #[error("singular Arrhenius exponent at x2 = {x2} (1 + x2/gamma = {denom:e})")]
    SingularExponent { x2: f64, denom: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("temperature must be positive, got {0} K")]
    NonPositiveTemperature(f64),

    #[error("non-finite state ({x1}, {x2}) at t = {t}")]
    NonFiniteState { t: f64, x1: f64, x2: f64 },

    #[error("csv export failed: {0}")]
    Export(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Export(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Export(e.to_string())
    }
}
