use thiserror::Error;

/// Errors raised across the PMCW baseband chain.
#[derive(Error, Debug)]
pub enum Error {
    /// Invalid static configuration (frame plan, LFSR spec, channel config).
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid argument to an otherwise well-configured operation.
    #[error("argument error: {0}")]
    Argument(String),

    /// Preamble acquisition did not find a usable plateau.
    #[error("acquisition failed: {0}")]
    AcquisitionFailed(String),

    /// Estimator output outside its usable range.
    #[error("estimate out of range: {0}")]
    OutOfRange(String),

    /// Malformed file artifact.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
