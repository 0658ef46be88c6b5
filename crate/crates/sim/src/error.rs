use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario {0}")]
    Scenario(String),
    #[error(transparent)]
    Core(#[from] optilog_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
