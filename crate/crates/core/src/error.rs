use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
