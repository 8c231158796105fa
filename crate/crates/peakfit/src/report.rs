//! Machine-readable report types and CSV emitters. Every JSON report
//! embeds the tool version, the fully resolved configuration, the seed,
//! and a content hash of the input, so a report is reproducible from
//! its own header. No wall-clock timestamps: identical runs produce
//! byte-identical files.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bootstrap::CiReport;
use crate::ccdf::EmpiricalCcdf;
use crate::error::Result;
use crate::gof::GofResult;
use crate::ingest::RejectedRow;
use crate::powerlaw::PowerLawFit;
use crate::tailscan::{CandidateRule, ScanResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Header common to every JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub input_sha256: Option<String>,
    pub config: serde_json::Value,
}

impl ReportMeta {
    pub fn new(seed: u64, input_sha256: Option<String>, config: serde_json::Value) -> Self {
        Self {
            tool: "peakfit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            input_sha256,
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub min_tail: usize,
    pub candidate_rule: CandidateRule,
    pub candidates: usize,
    /// Where the full scan profile CSV was written, when requested.
    pub profile_path: Option<String>,
}

/// Full fit report: the fitted tail model plus optional goodness-of-fit
/// and bootstrap sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub meta: ReportMeta,
    pub n: usize,
    pub fit: PowerLawFit,
    pub scan: ScanSummary,
    pub gof: Option<GofResult>,
    pub ci: Option<CiReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedReport {
    pub meta: ReportMeta,
    pub x: f64,
    pub probability: f64,
    pub interval: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub family: String,
    pub params: serde_json::Value,
    pub ks_distance: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub meta: ReportMeta,
    pub x_min: f64,
    pub significance: f64,
    pub rows: Vec<CompareRow>,
}

/// Empirical CCDF in ranking order (largest value first), one row per
/// distinct value.
pub fn write_ccdf_csv<W: Write>(out: W, ccdf: &EmpiricalCcdf) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "survival", "frequency"])?;
    for (point, freq) in ccdf.points().iter().zip(ccdf.frequencies()) {
        w.write_record(&[
            format!("{}", point.value),
            format!("{}", point.survival),
            format!("{freq}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Threshold-scan profile: one row per evaluated candidate.
pub fn write_profile_csv<W: Write>(out: W, scan: &ScanResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["xmin_candidate", "alpha", "ks_distance"])?;
    for e in &scan.profile {
        w.write_record(&[
            format!("{}", e.x_min),
            format!("{}", e.alpha),
            format!("{}", e.ks_distance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Confidence band: `x, low, point, high`, with `point` empty below the
/// fitted threshold.
pub fn write_band_csv<W: Write>(out: W, ci: &CiReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "low", "point", "high"])?;
    for bp in &ci.band {
        w.write_record(&[
            format!("{}", bp.x),
            format!("{}", bp.low),
            bp.point.map(|p| format!("{p}")).unwrap_or_default(),
            format!("{}", bp.high),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Replicate KS distances for histogram plotting.
pub fn write_replicates_csv<W: Write>(out: W, gof: &GofResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replicate_ks_distance"])?;
    for d in &gof.replicate_ds {
        w.write_record(&[format!("{d}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregated peak series as `bucket_start,peak` rows (the start column
/// is empty for untimestamped series).
pub fn write_peaks_csv<W: Write>(out: W, series: &crate::ccdf::PeakSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bucket_start", "peak"])?;
    for (i, v) in series.values().iter().enumerate() {
        let start = series
            .timestamps()
            .map(|ts| ts[i].format("%Y-%m-%dT%H:%M:%S").to_string())
            .unwrap_or_default();
        w.write_record(&[start, format!("{v}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sample_csv<W: Write>(out: W, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value"])?;
    for v in values {
        w.write_record(&[format!("{v}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rejects_csv<W: Write>(out: W, rejects: &[RejectedRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row_number", "reason"])?;
    for r in rejects {
        w.write_record(&[format!("{}", r.row), format!("{}", r.reason)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_compare_csv<W: Write>(out: W, report: &CompareReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["family", "params", "ks_distance", "p_value", "reject"])?;
    for row in &report.rows {
        w.write_record(&[
            row.family.clone(),
            row.params.to_string(),
            format!("{}", row.ks_distance),
            format!("{}", row.p_value),
            format!("{}", row.reject),
        ])?;
    }
    w.flush()?;
    Ok(())
}
