//! Truncated power-law tail model: evaluation, maximum-likelihood
//! estimation of the scaling parameter, and inverse-transform sampling.
//!
//! The tail is modeled above a threshold `x_min` carrying total survival
//! mass `w`, with density proportional to `(x / x_min)^-alpha`:
//!
//! ```text
//! pdf(x)  = w * (alpha - 1) / x_min * (x / x_min)^-alpha        x >= x_min
//! ccdf(x) = w * (x / x_min)^-(alpha - 1)                        x >= x_min
//! ```
//!
//! Below `x_min` the model is deliberately undefined; sub-threshold
//! queries belong to the empirical CCDF.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bootstrap::CiReport;
use crate::error::{Error, Result};

/// A fitted truncated power-law tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// Threshold above which the power law holds; one of the observed
    /// values when produced by a threshold scan.
    pub x_min: f64,
    /// Scaling parameter, strictly greater than 1.
    pub alpha: f64,
    /// Survival mass at the threshold, `n_tail / n_total` when fitted.
    pub w: f64,
    /// Observations at or above the threshold.
    pub n_tail: usize,
    /// Total observations in the series the fit came from.
    pub n_total: usize,
    /// Kolmogorov-Smirnov distance of the fit at the chosen threshold.
    pub ks_distance: f64,
}

impl PowerLawFit {
    pub fn new(
        x_min: f64,
        alpha: f64,
        w: f64,
        n_tail: usize,
        n_total: usize,
        ks_distance: f64,
    ) -> Result<Self> {
        if !(x_min.is_finite() && x_min > 0.0) {
            return Err(Error::InvalidValue { index: 0 });
        }
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(Error::InvalidAlpha { alpha });
        }
        if !(w > 0.0 && w <= 1.0) || !(0.0..=1.0).contains(&ks_distance) {
            return Err(Error::InvalidValue { index: 0 });
        }
        if n_total > 0 && (n_tail as f64 / n_total as f64 - w).abs() > 1e-12 {
            return Err(Error::FitMismatch {
                fit_n: n_tail,
                series_n: n_total,
            });
        }
        Ok(Self {
            x_min,
            alpha,
            w,
            n_tail,
            n_total,
            ks_distance,
        })
    }

    /// Fit from bare parameters, e.g. taken from a published table, with
    /// no backing sample (`n_tail`, `n_total`, and the KS distance are
    /// left at zero).
    pub fn from_parameters(x_min: f64, alpha: f64, w: f64) -> Result<Self> {
        Self::new(x_min, alpha, w, 0, 0, 0.0)
    }

    /// Tail CCDF `w * (x / x_min)^-(alpha - 1)`; equals `w` at the
    /// threshold and decreases strictly in `x`.
    pub fn tail_ccdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x < self.x_min {
            return Err(Error::BelowTail {
                x,
                x_min: self.x_min,
            });
        }
        Ok(self.w * (x / self.x_min).powf(-(self.alpha - 1.0)))
    }

    /// Tail density `w * (alpha - 1) / x_min * (x / x_min)^-alpha`;
    /// integrates to `w` over the tail.
    pub fn tail_pdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x < self.x_min {
            return Err(Error::BelowTail {
                x,
                x_min: self.x_min,
            });
        }
        Ok(self.w * (self.alpha - 1.0) / self.x_min * (x / self.x_min).powf(-self.alpha))
    }
}

/// Closed-form maximum-likelihood estimate of the scaling parameter for
/// a continuous power-law tail at a fixed threshold:
///
/// ```text
/// alpha = 1 + n / sum(ln(x_i / x_min))
/// ```
///
/// Requires at least two tail values, all at or above `x_min`, with at
/// least two strictly above it (otherwise the log-sum degenerates).
pub fn mle_alpha(tail_values: &[f64], x_min: f64) -> Result<f64> {
    if !(x_min.is_finite() && x_min > 0.0) {
        return Err(Error::InvalidValue { index: 0 });
    }
    let n = tail_values.len();
    if n < 2 {
        return Err(Error::InsufficientTail);
    }
    let mut log_sum = 0.0;
    let mut strictly_above = 0usize;
    for (index, &v) in tail_values.iter().enumerate() {
        if !v.is_finite() || v < x_min {
            return Err(Error::InvalidValue { index });
        }
        if v > x_min {
            strictly_above += 1;
        }
        log_sum += (v / x_min).ln();
    }
    if strictly_above < 2 || log_sum <= 0.0 {
        return Err(Error::DegenerateTail);
    }
    Ok(1.0 + n as f64 / log_sum)
}

/// Quantile of the tail model with `w = 1`: the inverse transform
/// `x_min * (1 - u)^(-1 / (alpha - 1))` for `u` in `[0, 1)`.
pub fn power_law_quantile(x_min: f64, alpha: f64, u: f64) -> f64 {
    x_min * (1.0 - u).powf(-1.0 / (alpha - 1.0))
}

/// Draw `count` independent tail variates by inverse transform.
/// Deterministic given the generator state.
pub fn sample_tail<R: Rng + ?Sized>(
    x_min: f64,
    alpha: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err(Error::InvalidAlpha { alpha });
    }
    if !(x_min.is_finite() && x_min > 0.0) {
        return Err(Error::InvalidValue { index: 0 });
    }
    Ok((0..count)
        .map(|_| power_law_quantile(x_min, alpha, rng.random::<f64>()))
        .collect())
}

/// Exceedance probability at `x`, with the pointwise confidence band
/// when a bootstrap report is supplied.
///
/// Errors with [`Error::BelowTail`] for `x < x_min`; such queries should
/// go to the empirical CCDF instead.
pub fn exceedance_query(
    fit: &PowerLawFit,
    x: f64,
    ci: Option<&CiReport>,
) -> Result<(f64, Option<(f64, f64)>)> {
    let point = fit.tail_ccdf(x)?;
    let band = ci.and_then(|report| report.band_at(x)).map(|(lo, hi)| {
        // The band always contains the point estimate where defined.
        (lo.min(point), hi.max(point))
    });
    Ok((point, band))
}
