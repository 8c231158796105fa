//! Threshold selection: scan candidate thresholds, fit the scaling
//! parameter at each, and keep the one whose tail gives the smallest
//! Kolmogorov-Smirnov distance.
//!
//! The KS distance compares the tail's empirical CCDF against the model
//! CCDF with `w = 1`. Because the empirical side is a step function and
//! the model side is continuous and monotone, the exact supremum over
//! the whole tail is attained at step edges; we therefore evaluate the
//! model at every distinct tail value against both the `>=` and the `>`
//! empirical survival and take the largest gap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ccdf::PeakSeries;
use crate::error::{Error, Result};
use crate::powerlaw::PowerLawFit;

/// How threshold candidates are chosen from the observed values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CandidateRule {
    /// Every distinct observed value with a large enough tail. The
    /// default, and the mode used by the verification suite.
    AllUnique,
    /// At most 512 quantile-spaced distinct values, for O(k n) scans on
    /// very large series.
    QuantileGrid,
}

const QUANTILE_GRID_SIZE: usize = 512;

/// One evaluated threshold candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub x_min: f64,
    pub alpha: f64,
    pub ks_distance: f64,
}

/// Outcome of a threshold scan: the winning fit plus the full profile
/// of every evaluated candidate, sorted by threshold ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub best: PowerLawFit,
    pub profile: Vec<ProfileEntry>,
    pub min_tail: usize,
}

/// KS distance between the tail's empirical CCDF and the `w = 1` model
/// CCDF, exact at step edges.
pub fn ks_distance(tail_values: &[f64], x_min: f64, alpha: f64) -> Result<f64> {
    if tail_values.is_empty() {
        return Err(Error::InsufficientTail);
    }
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err(Error::InvalidAlpha { alpha });
    }
    if !(x_min.is_finite() && x_min > 0.0) {
        return Err(Error::InvalidValue { index: 0 });
    }
    for (index, &v) in tail_values.iter().enumerate() {
        if !v.is_finite() || v < x_min {
            return Err(Error::InvalidValue { index });
        }
    }
    let mut sorted = tail_values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lns: Vec<f64> = sorted.iter().map(|v| v.ln()).collect();
    Ok(ks_from_index(&sorted, &lns, 0, x_min.ln(), alpha, None))
}

/// Walk the distinct values of `sorted[start..]`, comparing the model
/// survival `model_at(j)` (indexed by sorted position) against the
/// empirical survival on both sides of each step. With `abort_above`,
/// returns early once the running maximum reaches the bound; the
/// returned value is then only a witness that the candidate cannot win.
pub(crate) fn ks_step_walk<F: Fn(usize) -> f64>(
    sorted: &[f64],
    start: usize,
    model_at: F,
    abort_above: Option<f64>,
) -> f64 {
    let n = sorted.len();
    let m = (n - start) as f64;
    let mut d: f64 = 0.0;
    let mut j = start;
    while j < n {
        let mut k = j + 1;
        while k < n && sorted[k] == sorted[j] {
            k += 1;
        }
        let model = model_at(j);
        let s_ge = (n - j) as f64 / m;
        let s_gt = (n - k) as f64 / m;
        d = d.max((model - s_ge).abs()).max((model - s_gt).abs());
        if let Some(bound) = abort_above {
            if d >= bound {
                return d;
            }
        }
        j = k;
    }
    d
}

fn ks_from_index(
    sorted: &[f64],
    lns: &[f64],
    start: usize,
    ln_x_min: f64,
    alpha: f64,
    abort_above: Option<f64>,
) -> f64 {
    let c = alpha - 1.0;
    ks_step_walk(sorted, start, |j| (-c * (lns[j] - ln_x_min)).exp(), abort_above)
}

/// First-occurrence indices of distinct values whose tail is at least
/// `min_tail` long.
fn candidate_indices(sorted: &[f64], min_tail: usize, rule: CandidateRule) -> Vec<usize> {
    let n = sorted.len();
    let mut indices = Vec::new();
    for i in 0..=(n - min_tail) {
        if i == 0 || sorted[i] != sorted[i - 1] {
            indices.push(i);
        }
    }
    if rule == CandidateRule::QuantileGrid && indices.len() > QUANTILE_GRID_SIZE {
        let last = indices.len() - 1;
        let mut picked = Vec::with_capacity(QUANTILE_GRID_SIZE);
        for k in 0..QUANTILE_GRID_SIZE {
            let pos = (k as f64 / (QUANTILE_GRID_SIZE - 1) as f64 * last as f64).round() as usize;
            if picked.last() != Some(&indices[pos]) {
                picked.push(indices[pos]);
            }
        }
        return picked;
    }
    indices
}

/// Fit a candidate at `start`: closed-form alpha from the tail log-sum
/// (via a precomputed suffix sum), or `None` when the tail is too
/// degenerate to estimate.
fn fit_candidate(
    sorted: &[f64],
    lns: &[f64],
    suffix_ln: &[f64],
    start: usize,
) -> Option<(f64, usize)> {
    let n = sorted.len();
    let m = n - start;
    // Need at least two values strictly above the candidate.
    let mut run_end = start + 1;
    while run_end < n && sorted[run_end] == sorted[start] {
        run_end += 1;
    }
    if n - run_end < 2 {
        return None;
    }
    let log_sum = suffix_ln[start] - m as f64 * lns[start];
    if log_sum <= 0.0 {
        return None;
    }
    Some((1.0 + m as f64 / log_sum, m))
}

fn validate_scan_inputs(n: usize, min_tail: usize) -> Result<()> {
    if min_tail < 10 {
        return Err(Error::MinTailTooSmall { min_tail });
    }
    if n < min_tail {
        return Err(Error::InsufficientData { n, min_tail });
    }
    Ok(())
}

fn sorted_with_lns(values: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lns: Vec<f64> = sorted.iter().map(|v| v.ln()).collect();
    // Neumaier-compensated suffix sums keep the per-candidate log-sum
    // accurate to a few ulps even when it is a small difference of
    // large partial sums.
    let mut suffix_ln = vec![0.0; sorted.len() + 1];
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for i in (0..sorted.len()).rev() {
        let t = sum + lns[i];
        if sum.abs() >= lns[i].abs() {
            compensation += (sum - t) + lns[i];
        } else {
            compensation += (lns[i] - t) + sum;
        }
        sum = t;
        suffix_ln[i] = sum + compensation;
    }
    (sorted, lns, suffix_ln)
}

/// Scan every admissible threshold candidate, fit alpha at each, and
/// select the candidate with the smallest KS distance (ties broken
/// toward the smallest threshold, i.e. the largest tail).
pub fn scan_xmin(series: &PeakSeries, min_tail: usize, rule: CandidateRule) -> Result<ScanResult> {
    let n = series.len();
    validate_scan_inputs(n, min_tail)?;
    let (sorted, lns, suffix_ln) = sorted_with_lns(series.values());
    let candidates = candidate_indices(&sorted, min_tail, rule);

    let profile: Vec<ProfileEntry> = candidates
        .par_iter()
        .filter_map(|&i| {
            let (alpha, _m) = fit_candidate(&sorted, &lns, &suffix_ln, i)?;
            let d = ks_from_index(&sorted, &lns, i, lns[i], alpha, None);
            Some(ProfileEntry {
                x_min: sorted[i],
                alpha,
                ks_distance: d,
            })
        })
        .collect();

    let best_entry = profile
        .iter()
        .copied()
        .reduce(|best, e| if e.ks_distance < best.ks_distance { e } else { best })
        .ok_or(Error::NoValidCandidate)?;
    let n_tail = sorted.len() - sorted.partition_point(|&v| v < best_entry.x_min);
    let fit = PowerLawFit::new(
        best_entry.x_min,
        best_entry.alpha,
        n_tail as f64 / n as f64,
        n_tail,
        n,
        best_entry.ks_distance,
    )?;
    Ok(ScanResult {
        best: fit,
        profile,
        min_tail,
    })
}

/// Same selection as [`scan_xmin`] without the profile: candidates whose
/// running KS maximum already exceeds the best distance so far are
/// abandoned early. Used by the Monte Carlo refit loops, where only the
/// winning fit matters.
pub(crate) fn scan_best_only(values: &[f64], min_tail: usize) -> Result<PowerLawFit> {
    let n = values.len();
    validate_scan_inputs(n, min_tail)?;
    let (sorted, lns, suffix_ln) = sorted_with_lns(values);
    let candidates = candidate_indices(&sorted, min_tail, CandidateRule::AllUnique);

    let mut best: Option<(f64, f64, f64, usize)> = None; // (d, x_min, alpha, n_tail)
    for &i in &candidates {
        let Some((alpha, m)) = fit_candidate(&sorted, &lns, &suffix_ln, i) else {
            continue;
        };
        let bound = best.map(|(d, ..)| d);
        let d = ks_from_index(&sorted, &lns, i, lns[i], alpha, bound);
        if best.is_none() || d < bound.unwrap() {
            best = Some((d, sorted[i], alpha, m));
        }
    }
    let (d, x_min, alpha, n_tail) = best.ok_or(Error::NoValidCandidate)?;
    PowerLawFit::new(x_min, alpha, n_tail as f64 / n as f64, n_tail, n, d)
}
