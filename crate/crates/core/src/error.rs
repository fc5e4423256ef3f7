use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("capacity exceeded: {n} spins requested, engine limit is {max}")]
    CapacityExceeded { n: usize, max: usize },

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("fit failure: {0}")]
    Fit(String),

    #[error("variance map construction failed: {0}")]
    MapConstruction(String),

    #[error("T2 = {t2} outside variance map domain [{lo}, {hi}]")]
    Extrapolation { t2: f64, lo: f64, hi: f64 },

    #[error("squeezing parameter undefined: {0}")]
    UndefinedSqueezing(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
