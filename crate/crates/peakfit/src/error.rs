//! Crate-wide error type.

use crate::bootstrap::CiReport;
use crate::altdist::AltFamily;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input series is empty")]
    EmptyInput,

    #[error("value at index {index} is not a positive finite number")]
    InvalidValue { index: usize },

    #[error("timestamps must be strictly increasing and aligned 1:1 with values")]
    InvalidTimestamps,

    #[error("query point {x} is not finite")]
    NonFiniteQuery { x: f64 },

    #[error("tail has fewer than two observations")]
    InsufficientTail,

    #[error("tail is degenerate: fewer than two observations strictly above x_min")]
    DegenerateTail,

    #[error("x = {x} lies below x_min = {x_min}; the tail model is undefined there (query the empirical CCDF for sub-threshold values)")]
    BelowTail { x: f64, x_min: f64 },

    #[error("alpha must be greater than 1, got {alpha}")]
    InvalidAlpha { alpha: f64 },

    #[error("series has {n} observations, fewer than the minimum tail size {min_tail}")]
    InsufficientData { n: usize, min_tail: usize },

    #[error("minimum tail size must be at least 10, got {min_tail}")]
    MinTailTooSmall { min_tail: usize },

    #[error("no threshold candidate admits a valid fit")]
    NoValidCandidate,

    #[error("fit does not match the supplied series (fit side: {fit_n}, series side: {series_n})")]
    FitMismatch { fit_n: usize, series_n: usize },

    #[error("frame {frame} is not a calendar aggregation frame")]
    UnsupportedFrame { frame: crate::ccdf::Frame },

    #[error("at least 100 replicates are required, got {replicates}")]
    TooFewReplicates { replicates: usize },

    #[error("confidence level must lie in (0.5, 1), got {level}")]
    InvalidLevel { level: f64 },

    #[error("bootstrap unstable: {degenerate} of {replicates} resamples were degenerate")]
    UnstableBootstrap {
        degenerate: usize,
        replicates: usize,
        partial: Box<CiReport>,
    },

    #[error("{family} fit did not converge: {detail}")]
    FitDiverged { family: AltFamily, detail: String },

    #[error("CSV schema error: {0}")]
    Schema(String),

    #[error("{rejected} of {total} rows rejected, above the 10% quality threshold")]
    Quality { rejected: usize, total: usize },

    #[error("no bucket met the coverage requirement")]
    NoCompleteBuckets,

    #[error("series carries no timestamps")]
    NoTimestamps,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
