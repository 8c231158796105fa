//! Interval-meter CSV ingestion, peak aggregation over calendar frames,
//! and the rolling analysis window.
//!
//! Aggregation sums meters sharing a timestamp before taking the bucket
//! maximum (the coincident network peak); per-reading mode is available
//! behind the `sum_meters` flag. Buckets with too few readings would
//! bias the peak low, so they are omitted and reported instead of kept.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::ccdf::{Frame, PeakSeries};
use crate::error::{Error, Result};

/// One meter reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub timestamp: NaiveDateTime,
    pub value: f64,
    pub meter_id: Option<String>,
}

/// Accepted timestamp encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TimestampFormat {
    /// `2021-01-01T00:00[:00]`, `2021-01-01 00:00[:00]`, or a bare date.
    Iso8601,
    /// Seconds since the Unix epoch.
    EpochSeconds,
}

/// Column mapping for interval CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub timestamp_col: String,
    pub value_col: String,
    pub meter_col: Option<String>,
    pub timestamp_format: TimestampFormat,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp_col: "timestamp".into(),
            value_col: "value".into(),
            meter_col: None,
            timestamp_format: TimestampFormat::Iso8601,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    BadTimestamp,
    NonNumeric,
    NonFinite,
    Negative,
    MissingField,
    DuplicateTimestamp,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RejectReason::BadTimestamp => "bad_timestamp",
            RejectReason::NonNumeric => "non_numeric",
            RejectReason::NonFinite => "non_finite",
            RejectReason::Negative => "negative",
            RejectReason::MissingField => "missing_field",
            RejectReason::DuplicateTimestamp => "duplicate_timestamp",
        };
        f.write_str(s)
    }
}

/// A rejected row: 1-based data row number (header excluded) plus why.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub row: usize,
    pub reason: RejectReason,
}

/// Parse outcome: records sorted by timestamp, malformed rows collected
/// rather than silently dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedIntervals {
    pub records: Vec<IntervalRecord>,
    pub rejects: Vec<RejectedRow>,
}

fn parse_timestamp(raw: &str, format: TimestampFormat) -> Option<NaiveDateTime> {
    match format {
        TimestampFormat::Iso8601 => {
            let raw = raw.trim();
            for fmt in [
                "%Y-%m-%dT%H:%M:%S",
                "%Y-%m-%dT%H:%M",
                "%Y-%m-%d %H:%M:%S",
                "%Y-%m-%d %H:%M",
            ] {
                if let Ok(ts) = NaiveDateTime::parse_from_str(raw, fmt) {
                    return Some(ts);
                }
            }
            NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        }
        TimestampFormat::EpochSeconds => raw
            .trim()
            .parse::<i64>()
            .ok()
            .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
            .map(|dt| dt.naive_utc()),
    }
}

/// Parse an interval CSV. Rows that cannot be parsed land in the rejects
/// report; more than 10% rejected rows is a quality error. Duplicate
/// (meter, timestamp) pairs with identical values collapse silently,
/// conflicting duplicates are rejected.
pub fn parse_csv<R: Read>(source: R, schema: &CsvSchema) -> Result<ParsedIntervals> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found in header")))
    };
    let ts_idx = col(&schema.timestamp_col)?;
    let value_idx = col(&schema.value_col)?;
    let meter_idx = schema.meter_col.as_deref().map(col).transpose()?;

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    let mut seen: BTreeMap<(Option<String>, NaiveDateTime), f64> = BTreeMap::new();
    let mut total = 0usize;

    for (i, row) in reader.records().enumerate() {
        total += 1;
        let row_number = i + 1;
        let mut reject = |reason| rejects.push(RejectedRow {
            row: row_number,
            reason,
        });
        let Ok(row) = row else {
            reject(RejectReason::MissingField);
            continue;
        };
        let (Some(ts_raw), Some(value_raw)) = (row.get(ts_idx), row.get(value_idx)) else {
            reject(RejectReason::MissingField);
            continue;
        };
        let Some(timestamp) = parse_timestamp(ts_raw, schema.timestamp_format) else {
            reject(RejectReason::BadTimestamp);
            continue;
        };
        let Ok(value) = value_raw.trim().parse::<f64>() else {
            reject(RejectReason::NonNumeric);
            continue;
        };
        if !value.is_finite() {
            reject(RejectReason::NonFinite);
            continue;
        }
        if value < 0.0 {
            reject(RejectReason::Negative);
            continue;
        }
        let meter_id = meter_idx
            .and_then(|m| row.get(m))
            .map(|s| s.trim().to_string());
        let key = (meter_id.clone(), timestamp);
        match seen.get(&key).copied() {
            Some(existing) if existing == value => continue,
            Some(_) => {
                reject(RejectReason::DuplicateTimestamp);
                continue;
            }
            None => {
                seen.insert(key, value);
            }
        }
        records.push(IntervalRecord {
            timestamp,
            value,
            meter_id,
        });
    }

    if rejects.len() * 10 > total {
        return Err(Error::Quality {
            rejected: rejects.len(),
            total,
        });
    }
    records.sort_by(|a, b| (a.timestamp, &a.meter_id).cmp(&(b.timestamp, &b.meter_id)));
    Ok(ParsedIntervals { records, rejects })
}

/// Read an already-aggregated peak series: one value per row, optionally
/// expanded by a count column (for frequency-table round trips) or
/// paired with a timestamp column. Strict: any malformed row is an
/// error, since peak files are tool output rather than raw meter data.
pub fn read_peaks_csv<R: Read>(
    source: R,
    value_col: &str,
    count_col: Option<&str>,
    timestamp_col: Option<&str>,
    format: TimestampFormat,
) -> Result<PeakSeries> {
    if count_col.is_some() && timestamp_col.is_some() {
        return Err(Error::Schema(
            "count and timestamp columns cannot be combined".into(),
        ));
    }
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found in header")))
    };
    let value_idx = col(value_col)?;
    let count_idx = count_col.map(col).transpose()?;
    let ts_idx = timestamp_col.map(col).transpose()?;

    let mut values = Vec::new();
    let mut stamps = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::Schema(format!("row {}: {what}", i + 1));
        let value: f64 = row
            .get(value_idx)
            .ok_or_else(|| bad("missing value"))?
            .trim()
            .parse()
            .map_err(|_| bad("unparseable value"))?;
        let count = match count_idx {
            Some(c) => row
                .get(c)
                .ok_or_else(|| bad("missing count"))?
                .trim()
                .parse::<usize>()
                .map_err(|_| bad("unparseable count"))?,
            None => 1,
        };
        values.extend(std::iter::repeat_n(value, count));
        if let Some(t) = ts_idx {
            let raw = row.get(t).ok_or_else(|| bad("missing timestamp"))?;
            stamps.push(parse_timestamp(raw, format).ok_or_else(|| bad("bad timestamp"))?);
        }
    }
    PeakSeries::new(values, ts_idx.map(|_| stamps), Frame::Raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmitReason {
    LowCoverage,
    NonPositivePeak,
}

/// A bucket excluded from the output series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmittedBucket {
    pub start: NaiveDateTime,
    pub readings: usize,
    pub expected: usize,
    pub reason: OmitReason,
}

/// Aggregation output: the peak series plus the buckets that were
/// dropped for insufficient coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub series: PeakSeries,
    pub omitted: Vec<OmittedBucket>,
}

fn bucket_start(ts: NaiveDateTime, frame: Frame) -> NaiveDateTime {
    match frame {
        Frame::Hourly => ts.date().and_hms_opt(ts.hour(), 0, 0).unwrap(),
        Frame::Daily => ts.date().and_hms_opt(0, 0, 0).unwrap(),
        Frame::Weekly => {
            let monday = ts.date() - Duration::days(ts.weekday().num_days_from_monday() as i64);
            monday.and_hms_opt(0, 0, 0).unwrap()
        }
        Frame::Monthly => NaiveDate::from_ymd_opt(ts.year(), ts.month(), 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap(),
        Frame::Raw => unreachable!("raw frame rejected before bucketing"),
    }
}

fn bucket_seconds(start: NaiveDateTime, frame: Frame) -> i64 {
    match frame {
        Frame::Hourly => 3600,
        Frame::Daily => 86_400,
        Frame::Weekly => 7 * 86_400,
        Frame::Monthly => {
            let (y, m) = (start.year(), start.month());
            let next = if m == 12 {
                NaiveDate::from_ymd_opt(y + 1, 1, 1)
            } else {
                NaiveDate::from_ymd_opt(y, m + 1, 1)
            }
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
            (next - start).num_seconds()
        }
        Frame::Raw => unreachable!(),
    }
}

/// Aggregate interval records into a peak series over a calendar frame
/// (weeks start Monday, civil time throughout).
///
/// With `sum_meters`, readings sharing a timestamp are summed across
/// meters first, so each bucket's peak is the coincident network peak.
/// Buckets with fewer than `min_coverage` of the expected readings
/// (expected = bucket span over the median reading interval) are
/// omitted and reported.
pub fn aggregate_peaks(
    records: &[IntervalRecord],
    frame: Frame,
    sum_meters: bool,
    min_coverage: f64,
) -> Result<Aggregation> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    if frame == Frame::Raw {
        return Err(Error::UnsupportedFrame { frame });
    }
    if !(0.0..=1.0).contains(&min_coverage) {
        return Err(Error::InvalidValue { index: 0 });
    }

    // The timing stream: one entry per distinct timestamp, value summed
    // across meters when requested, else the per-timestamp maximum of
    // individual readings (each reading still counts once for peaks).
    let mut per_ts: BTreeMap<NaiveDateTime, f64> = BTreeMap::new();
    for r in records {
        let slot = per_ts.entry(r.timestamp).or_insert(0.0);
        if sum_meters {
            *slot += r.value;
        } else {
            *slot = slot.max(r.value);
        }
    }

    let stamps: Vec<NaiveDateTime> = per_ts.keys().copied().collect();
    let cadence = if stamps.len() < 2 {
        None
    } else {
        let mut deltas: Vec<i64> = stamps
            .windows(2)
            .map(|w| (w[1] - w[0]).num_seconds())
            .collect();
        deltas.sort_unstable();
        Some(deltas[deltas.len() / 2].max(1))
    };

    struct Bucket {
        peak: f64,
        readings: usize,
    }
    let mut buckets: BTreeMap<NaiveDateTime, Bucket> = BTreeMap::new();
    for (&ts, &value) in &per_ts {
        let b = buckets.entry(bucket_start(ts, frame)).or_insert(Bucket {
            peak: f64::NEG_INFINITY,
            readings: 0,
        });
        b.peak = b.peak.max(value);
        b.readings += 1;
    }

    let mut starts = Vec::new();
    let mut peaks = Vec::new();
    let mut omitted = Vec::new();
    for (start, bucket) in buckets {
        let expected = match cadence {
            Some(c) => ((bucket_seconds(start, frame) as f64 / c as f64).round() as usize).max(1),
            None => 1,
        };
        if (bucket.readings as f64) < min_coverage * expected as f64 {
            omitted.push(OmittedBucket {
                start,
                readings: bucket.readings,
                expected,
                reason: OmitReason::LowCoverage,
            });
        } else if bucket.peak <= 0.0 {
            omitted.push(OmittedBucket {
                start,
                readings: bucket.readings,
                expected,
                reason: OmitReason::NonPositivePeak,
            });
        } else {
            starts.push(start);
            peaks.push(bucket.peak);
        }
    }
    if peaks.is_empty() {
        return Err(Error::NoCompleteBuckets);
    }
    Ok(Aggregation {
        series: PeakSeries::new(peaks, Some(starts), frame)?,
        omitted,
    })
}

/// Rolling analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Window length in days.
    pub length_days: i64,
    /// Right edge of the window; defaults to the latest timestamp.
    pub anchor: Option<NaiveDateTime>,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            length_days: 730,
            anchor: None,
        }
    }
}

/// Keep only observations inside the closed interval
/// `[anchor - length, anchor]`.
pub fn apply_window(series: &PeakSeries, window: &WindowSpec) -> Result<PeakSeries> {
    let stamps = series.timestamps().ok_or(Error::NoTimestamps)?;
    let anchor = window.anchor.unwrap_or(*stamps.last().unwrap());
    let cut = anchor - Duration::days(window.length_days);
    let mut values = Vec::new();
    let mut kept = Vec::new();
    for (&ts, &v) in stamps.iter().zip(series.values()) {
        if ts >= cut && ts <= anchor {
            kept.push(ts);
            values.push(v);
        }
    }
    PeakSeries::new(values, Some(kept), series.frame())
}
