//! C ABI over the peakfit library: opaque handles, status codes, and a
//! thread-local error message. Every function is panic-safe at the
//! boundary and null-tolerant.
//!
//! Ownership: `*_create`/`*_fit` return heap handles the caller must
//! release with the matching `*_free`. Output buffers are always
//! caller-allocated.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use peakfit::{
    bootstrap_ci, gof_pvalue, sample_tail, BootstrapOptions, Error, GofOptions, PeakSeries,
    PowerLawFit,
};

/// Outcome of a peakfit call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakfitStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument failed validation (see the last error message).
    InvalidArgument = 2,
    /// Not enough data for the requested operation.
    InsufficientData = 3,
    /// The tail was too degenerate to fit.
    DegenerateTail = 4,
    /// Query below the fitted threshold; use the empirical CCDF.
    BelowTail = 5,
    /// Bootstrap resampling was too unstable to report.
    Unstable = 6,
    /// Unexpected internal failure.
    InternalError = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> PeakfitStatus {
    match err {
        Error::EmptyInput | Error::InsufficientData { .. } | Error::InsufficientTail => {
            PeakfitStatus::InsufficientData
        }
        Error::DegenerateTail | Error::NoValidCandidate => PeakfitStatus::DegenerateTail,
        Error::BelowTail { .. } => PeakfitStatus::BelowTail,
        Error::UnstableBootstrap { .. } => PeakfitStatus::Unstable,
        Error::InvalidValue { .. }
        | Error::InvalidAlpha { .. }
        | Error::InvalidLevel { .. }
        | Error::TooFewReplicates { .. }
        | Error::MinTailTooSmall { .. }
        | Error::NonFiniteQuery { .. }
        | Error::FitMismatch { .. } => PeakfitStatus::InvalidArgument,
        _ => PeakfitStatus::InternalError,
    }
}

fn fail(err: &Error) -> PeakfitStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

/// Run `body` with panics converted to `InternalError`.
fn guarded<F: FnOnce() -> PeakfitStatus>(body: F) -> PeakfitStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            PeakfitStatus::InternalError
        }
    }
}

/// An owned, validated peak series.
pub struct PeakfitSeries {
    inner: PeakSeries,
}

/// A fitted truncated power-law tail.
pub struct PeakfitFit {
    inner: PowerLawFit,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn peakfit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the last error message for this thread into `buf` (truncated to
/// `cap - 1` bytes, always NUL-terminated when `cap > 0`). Returns the
/// full message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must point to at least `cap` writable bytes, or be null with
/// `cap == 0` to query the length alone.
#[no_mangle]
pub unsafe extern "C" fn peakfit_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Build a series from `len` strictly positive finite values.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be a valid
/// destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn peakfit_series_create(
    values: *const f64,
    len: usize,
    out: *mut *mut PeakfitSeries,
) -> PeakfitStatus {
    guarded(|| {
        if values.is_null() || out.is_null() {
            set_last_error("null pointer");
            return PeakfitStatus::NullPointer;
        }
        let slice = std::slice::from_raw_parts(values, len);
        match PeakSeries::from_values(slice.to_vec()) {
            Ok(series) => {
                *out = Box::into_raw(Box::new(PeakfitSeries { inner: series }));
                PeakfitStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `series` must be null or a pointer from `peakfit_series_create` that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn peakfit_series_free(series: *mut PeakfitSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Number of observations; 0 for null.
///
/// # Safety
/// `series` must be null or a live series handle.
#[no_mangle]
pub unsafe extern "C" fn peakfit_series_len(series: *const PeakfitSeries) -> usize {
    if series.is_null() {
        0
    } else {
        (*series).inner.len()
    }
}

/// Empirical survival probability at `x` (fraction of observations at
/// or above `x`) — the fallback for queries below a fitted threshold.
///
/// # Safety
/// `series` must be a live series handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn peakfit_series_survival(
    series: *const PeakfitSeries,
    x: f64,
    out: *mut f64,
) -> PeakfitStatus {
    guarded(|| {
        if series.is_null() || out.is_null() {
            set_last_error("null pointer");
            return PeakfitStatus::NullPointer;
        }
        let ccdf = peakfit::EmpiricalCcdf::from_series(&(*series).inner);
        match ccdf.survival_at(x) {
            Ok(p) => {
                *out = p;
                PeakfitStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Fit the truncated power-law tail by scanning thresholds and
/// minimizing the KS distance. `min_tail` is the smallest admissible
/// tail size (at least 10).
///
/// # Safety
/// `series` must be a live series handle; `out` must be a valid
/// destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn peakfit_fit(
    series: *const PeakfitSeries,
    min_tail: usize,
    out: *mut *mut PeakfitFit,
) -> PeakfitStatus {
    guarded(|| {
        if series.is_null() || out.is_null() {
            set_last_error("null pointer");
            return PeakfitStatus::NullPointer;
        }
        match peakfit::scan_xmin(
            &(*series).inner,
            min_tail,
            peakfit::CandidateRule::AllUnique,
        ) {
            Ok(scan) => {
                *out = Box::into_raw(Box::new(PeakfitFit { inner: scan.best }));
                PeakfitStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `fit` must be null or a pointer from `peakfit_fit` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn peakfit_fit_free(fit: *mut PeakfitFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

macro_rules! fit_getter {
    ($(#[$doc:meta])* $name:ident, $field:ident, $ty:ty, $null:expr) => {
        $(#[$doc])*
        /// # Safety
        /// `fit` must be null or a live fit handle.
        #[no_mangle]
        pub unsafe extern "C" fn $name(fit: *const PeakfitFit) -> $ty {
            if fit.is_null() {
                $null
            } else {
                (*fit).inner.$field as $ty
            }
        }
    };
}

fit_getter!(
    /// Fitted threshold; NaN for null.
    peakfit_fit_x_min, x_min, f64, f64::NAN);
fit_getter!(
    /// Fitted scaling parameter; NaN for null.
    peakfit_fit_alpha, alpha, f64, f64::NAN);
fit_getter!(
    /// Survival mass at the threshold; NaN for null.
    peakfit_fit_w, w, f64, f64::NAN);
fit_getter!(
    /// KS distance at the chosen threshold; NaN for null.
    peakfit_fit_ks_distance, ks_distance, f64, f64::NAN);
fit_getter!(
    /// Tail size; 0 for null.
    peakfit_fit_n_tail, n_tail, usize, 0);
fit_getter!(
    /// Total observations behind the fit; 0 for null.
    peakfit_fit_n_total, n_total, usize, 0);

/// Model exceedance probability at `x >= x_min`.
///
/// # Safety
/// `fit` must be a live fit handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn peakfit_fit_tail_ccdf(
    fit: *const PeakfitFit,
    x: f64,
    out: *mut f64,
) -> PeakfitStatus {
    guarded(|| {
        if fit.is_null() || out.is_null() {
            set_last_error("null pointer");
            return PeakfitStatus::NullPointer;
        }
        match (*fit).inner.tail_ccdf(x) {
            Ok(p) => {
                *out = p;
                PeakfitStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Model tail density at `x >= x_min`.
///
/// # Safety
/// `fit` must be a live fit handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn peakfit_fit_tail_pdf(
    fit: *const PeakfitFit,
    x: f64,
    out: *mut f64,
) -> PeakfitStatus {
    guarded(|| {
        if fit.is_null() || out.is_null() {
            set_last_error("null pointer");
            return PeakfitStatus::NullPointer;
        }
        match (*fit).inner.tail_pdf(x) {
            Ok(p) => {
                *out = p;
                PeakfitStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Monte Carlo goodness-of-fit p-value for a fit produced from this
/// series with the same `min_tail`. Deterministic given `seed`. Writes
/// the p-value and whether the null is rejected at `significance`.
///
/// # Safety
/// `series` and `fit` must be live handles; `out_p_value` and
/// `out_reject` must be writable.
#[no_mangle]
pub unsafe extern "C" fn peakfit_gof(
    series: *const PeakfitSeries,
    fit: *const PeakfitFit,
    min_tail: usize,
    replicates: usize,
    significance: f64,
    seed: u64,
    out_p_value: *mut f64,
    out_reject: *mut i32,
) -> PeakfitStatus {
    guarded(|| {
        if series.is_null() || fit.is_null() || out_p_value.is_null() || out_reject.is_null() {
            set_last_error("null pointer");
            return PeakfitStatus::NullPointer;
        }
        let opts = GofOptions {
            replicates,
            seed,
            significance,
            min_tail,
        };
        match gof_pvalue(&(*series).inner, &(*fit).inner, &opts) {
            Ok(result) => {
                *out_p_value = result.p_value;
                *out_reject = result.reject as i32;
                PeakfitStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Bootstrap percentile confidence intervals for the threshold and the
/// scaling parameter. Deterministic given `seed`.
///
/// # Safety
/// `series` must be a live handle; the four interval outputs must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn peakfit_bootstrap_intervals(
    series: *const PeakfitSeries,
    min_tail: usize,
    replicates: usize,
    level: f64,
    seed: u64,
    out_x_min_low: *mut f64,
    out_x_min_high: *mut f64,
    out_alpha_low: *mut f64,
    out_alpha_high: *mut f64,
) -> PeakfitStatus {
    guarded(|| {
        if series.is_null()
            || out_x_min_low.is_null()
            || out_x_min_high.is_null()
            || out_alpha_low.is_null()
            || out_alpha_high.is_null()
        {
            set_last_error("null pointer");
            return PeakfitStatus::NullPointer;
        }
        let opts = BootstrapOptions {
            replicates,
            level,
            seed,
            min_tail,
            band_grid: Vec::new(),
        };
        match bootstrap_ci(&(*series).inner, &opts) {
            Ok(report) => {
                *out_x_min_low = report.xmin_interval.0;
                *out_x_min_high = report.xmin_interval.1;
                *out_alpha_low = report.alpha_interval.0;
                *out_alpha_high = report.alpha_interval.1;
                PeakfitStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Fill `out` with `count` power-law tail variates (inverse transform,
/// deterministic given `seed`); every variate is at least `x_min`.
///
/// # Safety
/// `out` must point to `count` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn peakfit_sample_tail(
    x_min: f64,
    alpha: f64,
    count: usize,
    seed: u64,
    out: *mut f64,
) -> PeakfitStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null pointer");
            return PeakfitStatus::NullPointer;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match sample_tail(x_min, alpha, count, &mut rng) {
            Ok(values) => {
                std::ptr::copy_nonoverlapping(values.as_ptr(), out, count);
                PeakfitStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
