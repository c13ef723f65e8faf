use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("every dictionary candidate is numerically zero on the domain")]
    DegenerateDictionary,

    #[error("projection failed at iteration {iteration}: Gram matrix singular after jitter {jitter:e}")]
    Projection { iteration: usize, jitter: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
