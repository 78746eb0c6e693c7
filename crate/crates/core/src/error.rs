use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid ring parameters: {0}")]
    InvalidRing(String),
    #[error("fwhm target unreachable: {0}")]
    Unreachable(String),
    #[error("resonance not resolved: {0}")]
    Unresolved(String),
    #[error("invalid AWG bank: {0}")]
    InvalidBank(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error comes from user configuration rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Json(_)
                | Error::InvalidGrid(_)
                | Error::InvalidRing(_)
                | Error::InvalidBank(_)
                | Error::InvalidSchedule(_)
                | Error::InvalidSpectrum(_)
                | Error::Unreachable(_)
        )
    }
}
