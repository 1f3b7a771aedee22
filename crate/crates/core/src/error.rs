use thiserror::Error;

use crate::model::BasisPair;
use crate::observables::CellKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("missing observable for cell `{0}`")]
    MissingCell(CellKey),

    #[error("invalid decoy settings: {0}")]
    InvalidSettings(String),

    #[error("estimation failed for {basis}: {reason}")]
    EstimationFailed { basis: BasisPair, reason: String },

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("counts line {line}: {reason}")]
    Schema { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }
}

/// Rejects values outside `[0, 1]` (and NaN).
pub(crate) fn check_probability(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::invalid(name, format!("{value} is not a probability in [0, 1]")));
    }
    Ok(())
}
