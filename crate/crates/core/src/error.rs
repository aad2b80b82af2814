use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix exponential overflow: {0}")]
    ExpOverflow(String),

    #[error("quadrature abscissae do not match the propagator step: {0}")]
    AbscissaMismatch(String),

    #[error("Picard iteration diverged at t = {time}: distances {distances:?}; try a shorter window")]
    PicardDivergence { time: f64, distances: Vec<f64> },

    #[error("explicit multistep scheme blew up at t = {time} (energy {energy:e} > 10x initial {initial:e}); use a smaller step")]
    MultistepInstability { time: f64, energy: f64, initial: f64 },

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
