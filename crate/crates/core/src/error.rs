//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: String, reason: String },

    /// Gordon terminal value diverges unless the discount rate strictly
    /// exceeds the perpetual growth rate.
    #[error("discount rate {rate} must exceed perpetual growth {growth}")]
    DivergentValuation { rate: f64, growth: f64 },

    #[error("growth undefined: previous value is zero")]
    UndefinedGrowth,

    #[error("compound growth rate requires positive endpoints and q >= 1 (start {start}, end {end}, q {quarters})")]
    GrowthDomain { start: f64, end: f64, quarters: i32 },

    #[error("file format error: {0}")]
    FileFormat(String),

    #[error("registry error: {0}")]
    Registry(String),

    #[error("asset {ticker}: {reason}")]
    Asset { ticker: String, reason: String },

    #[error("no overlapping quarters across the compared series")]
    EmptyIntersection,

    #[error("cannot compare series of different metrics")]
    MixedMetrics,

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
