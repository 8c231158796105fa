//! Heavy-tail statistical inference for peak-load series.
//!
//! The pipeline: build an empirical CCDF from observed peaks, fit a
//! truncated power-law tail by scanning thresholds and minimizing the
//! Kolmogorov-Smirnov distance, validate the fit with a Monte-Carlo
//! goodness-of-fit test, quantify uncertainty with bootstrap confidence
//! intervals, and answer exceedance-probability queries. Exponential,
//! lognormal, and gamma tails run through the same machinery for model
//! comparison.

pub mod altdist;
pub mod bootstrap;
pub mod ccdf;
pub mod cli;
pub mod error;
pub mod gof;
pub mod ingest;
mod optim;
pub mod powerlaw;
pub mod report;
pub mod tailscan;

pub use crate::altdist::{fit_alt, gof_alt, AltFamily, AltFit, AltParams};
pub use crate::bootstrap::{bootstrap_ci, BootstrapOptions, CiReport};
pub use crate::ccdf::{EmpiricalCcdf, Frame, PeakSeries};
pub use crate::error::{Error, Result};
pub use crate::gof::{gof_pvalue, GofOptions, GofResult};
pub use crate::ingest::{aggregate_peaks, apply_window, parse_csv, CsvSchema, IntervalRecord, WindowSpec};
pub use crate::powerlaw::{mle_alpha, power_law_quantile, sample_tail, PowerLawFit};
pub use crate::tailscan::{ks_distance, scan_xmin, CandidateRule, ScanResult};
