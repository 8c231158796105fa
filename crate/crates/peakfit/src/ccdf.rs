//! Sample containers and the empirical complementary cumulative
//! distribution function.
//!
//! The empirical CCDF at x is the fraction of observations greater than
//! or equal to x. Points are stored largest-value first, one point per
//! distinct value, with ties collapsed into a single point carrying the
//! summed frequency.

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Aggregation frame a peak series was built over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Hourly,
    Daily,
    Weekly,
    Monthly,
    /// Values taken as-is, no calendar aggregation.
    Raw,
}

impl std::fmt::Display for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Frame::Hourly => "hourly",
            Frame::Daily => "daily",
            Frame::Weekly => "weekly",
            Frame::Monthly => "monthly",
            Frame::Raw => "raw",
        };
        f.write_str(s)
    }
}

/// Ordered peak observations for one feeder and one aggregation frame.
///
/// Immutable after construction: every value is strictly positive and
/// finite, and timestamps (when present) are strictly increasing and
/// aligned 1:1 with values.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSeries {
    values: Vec<f64>,
    timestamps: Option<Vec<NaiveDateTime>>,
    frame: Frame,
}

impl PeakSeries {
    pub fn new(
        values: Vec<f64>,
        timestamps: Option<Vec<NaiveDateTime>>,
        frame: Frame,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidValue { index });
            }
        }
        if let Some(ts) = &timestamps {
            if ts.len() != values.len() || ts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidTimestamps);
            }
        }
        Ok(Self {
            values,
            timestamps,
            frame,
        })
    }

    /// Untimestamped series with [`Frame::Raw`].
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, None, Frame::Raw)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> Option<&[NaiveDateTime]> {
        self.timestamps.as_deref()
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One step of the empirical CCDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdfPoint {
    pub value: f64,
    /// Fraction of observations greater than or equal to `value`.
    pub survival: f64,
}

/// Empirical CCDF: distinct observed values, largest first, each with
/// its survival probability and frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCcdf {
    points: Vec<CcdfPoint>,
    frequencies: Vec<usize>,
    total: usize,
}

impl EmpiricalCcdf {
    /// Build from raw values, validating them first.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidValue { index });
            }
        }
        Ok(Self::from_valid(values))
    }

    /// Build from an already validated series.
    pub fn from_series(series: &PeakSeries) -> Self {
        Self::from_valid(series.values())
    }

    fn from_valid(values: &[f64]) -> Self {
        let total = values.len();
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());

        let mut points = Vec::new();
        let mut frequencies = Vec::new();
        let mut seen = 0usize;
        let mut i = 0;
        while i < sorted.len() {
            let v = sorted[i];
            let mut j = i;
            while j < sorted.len() && sorted[j] == v {
                j += 1;
            }
            let freq = j - i;
            seen += freq;
            points.push(CcdfPoint {
                value: v,
                survival: seen as f64 / total as f64,
            });
            frequencies.push(freq);
            i = j;
        }
        Self {
            points,
            frequencies,
            total,
        }
    }

    /// Points sorted by value descending (largest peak first).
    pub fn points(&self) -> &[CcdfPoint] {
        &self.points
    }

    /// Frequency of each distinct value, aligned with [`points`](Self::points).
    pub fn frequencies(&self) -> &[usize] {
        &self.frequencies
    }

    /// Total number of observations.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Step evaluation of the empirical survival function: the fraction
    /// of observations greater than or equal to `x`. Returns 0 above the
    /// largest stored value and 1 at or below the smallest.
    pub fn survival_at(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFiniteQuery { x });
        }
        // Points are descending, so values >= x form a prefix; the last
        // entry of that prefix is the smallest stored value >= x.
        let p = self.points.partition_point(|pt| pt.value >= x);
        if p == 0 {
            Ok(0.0)
        } else {
            Ok(self.points[p - 1].survival)
        }
    }
}
