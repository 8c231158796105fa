//! Nonparametric bootstrap for fit uncertainty: percentile confidence
//! intervals for the threshold and scaling parameter, and a pointwise
//! confidence band for the tail CCDF.
//!
//! Each replicate resamples the series with replacement and reruns the
//! full threshold scan. Intervals use the nearest-rank percentile rule
//! (no interpolation), which keeps endpoints exactly equal to order
//! statistics on every platform.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ccdf::PeakSeries;
use crate::error::{Error, Result};
use crate::gof::replicate_rng;
use crate::tailscan::scan_best_only;

/// Settings for a bootstrap run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    /// Number of resamples (at least 100).
    pub replicates: usize,
    /// Confidence level, in (0.5, 1).
    pub level: f64,
    /// Master seed; replicate i draws from stream i.
    pub seed: u64,
    /// Minimum tail size for the per-replicate rescan.
    pub min_tail: usize,
    /// Load values at which the CCDF band is evaluated; may be empty.
    pub band_grid: Vec<f64>,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 2500,
            level: 0.95,
            seed: 0,
            min_tail: 10,
            band_grid: Vec::new(),
        }
    }
}

/// Parameters recovered from one bootstrap resample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFit {
    pub x_min: f64,
    pub alpha: f64,
    pub w: f64,
}

/// One band grid point. `point` is the point-estimate curve where the
/// fitted tail model is defined, and the band always contains it there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub x: f64,
    pub low: f64,
    pub point: Option<f64>,
    pub high: f64,
}

/// Percentile confidence intervals and CCDF band from a bootstrap run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiReport {
    pub level: f64,
    pub xmin_interval: (f64, f64),
    pub alpha_interval: (f64, f64),
    pub band: Vec<BandPoint>,
    /// Requested number of resamples.
    pub replicates: usize,
    /// Resamples whose rescan failed; they contribute nothing.
    pub degenerate: usize,
    pub seed: u64,
    pub replicate_fits: Vec<ReplicateFit>,
}

impl CiReport {
    /// Pointwise band at an arbitrary query point, recomputed from the
    /// replicate parameters. Replicates whose threshold lies above `x`
    /// contribute their survival at their own threshold (`w`), the left
    /// endpoint of their curve, since the resample itself is no longer
    /// available. Returns `None` when no replicate fits were recorded.
    pub fn band_at(&self, x: f64) -> Option<(f64, f64)> {
        if self.replicate_fits.is_empty() || !x.is_finite() {
            return None;
        }
        let mut values: Vec<f64> = self
            .replicate_fits
            .iter()
            .map(|r| {
                if x >= r.x_min {
                    r.w * (x / r.x_min).powf(-(r.alpha - 1.0))
                } else {
                    r.w
                }
            })
            .collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q_lo = (1.0 - self.level) / 2.0;
        Some((
            nearest_rank(&values, q_lo),
            nearest_rank(&values, 1.0 - q_lo),
        ))
    }
}

/// Nearest-rank percentile: the ceil(q m)-th order statistic of a
/// sorted, non-empty slice.
pub(crate) fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    let rank = (q * m as f64).ceil() as usize;
    sorted[rank.clamp(1, m) - 1]
}

/// Resample the series with replacement `replicates` times, rescan each
/// resample, and summarize the recovered parameters as percentile
/// intervals plus a pointwise CCDF band over `band_grid`.
///
/// Fails with [`Error::UnstableBootstrap`] (carrying the partial report)
/// when more than 20% of the resamples cannot be refitted.
pub fn bootstrap_ci(series: &PeakSeries, opts: &BootstrapOptions) -> Result<CiReport> {
    if opts.replicates < 100 {
        return Err(Error::TooFewReplicates {
            replicates: opts.replicates,
        });
    }
    if !(opts.level > 0.5 && opts.level < 1.0) {
        return Err(Error::InvalidLevel { level: opts.level });
    }
    let point_fit = scan_best_only(series.values(), opts.min_tail)?;
    let values = series.values();
    let n = values.len();
    let grid = &opts.band_grid;

    let outcomes: Vec<Option<(ReplicateFit, Vec<f64>)>> = (0..opts.replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(opts.seed, i);
            let mut resample: Vec<f64> =
                (0..n).map(|_| values[rng.random_range(0..n)]).collect();
            let fit = scan_best_only(&resample, opts.min_tail).ok()?;
            resample.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let curve = grid
                .iter()
                .map(|&x| {
                    if x >= fit.x_min {
                        fit.w * (x / fit.x_min).powf(-(fit.alpha - 1.0))
                    } else {
                        // Below this replicate's threshold its model is
                        // undefined; substitute the resample's own
                        // empirical survival at x.
                        let below = resample.partition_point(|&v| v < x);
                        (n - below) as f64 / n as f64
                    }
                })
                .collect();
            Some((
                ReplicateFit {
                    x_min: fit.x_min,
                    alpha: fit.alpha,
                    w: fit.w,
                },
                curve,
            ))
        })
        .collect();

    let degenerate = outcomes.iter().filter(|o| o.is_none()).count();
    let kept: Vec<(ReplicateFit, Vec<f64>)> = outcomes.into_iter().flatten().collect();

    let q_lo = (1.0 - opts.level) / 2.0;
    let interval = |extract: fn(&ReplicateFit) -> f64| -> (f64, f64) {
        if kept.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let mut xs: Vec<f64> = kept.iter().map(|(r, _)| extract(r)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        (nearest_rank(&xs, q_lo), nearest_rank(&xs, 1.0 - q_lo))
    };

    let band: Vec<BandPoint> = grid
        .iter()
        .enumerate()
        .map(|(gi, &x)| {
            let point = point_fit.tail_ccdf(x).ok();
            if kept.is_empty() {
                return BandPoint {
                    x,
                    low: f64::NAN,
                    point,
                    high: f64::NAN,
                };
            }
            let mut vals: Vec<f64> = kept.iter().map(|(_, curve)| curve[gi]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut low = nearest_rank(&vals, q_lo);
            let mut high = nearest_rank(&vals, 1.0 - q_lo);
            if let Some(p) = point {
                low = low.min(p);
                high = high.max(p);
            }
            BandPoint { x, low, point, high }
        })
        .collect();

    let report = CiReport {
        level: opts.level,
        xmin_interval: interval(|r| r.x_min),
        alpha_interval: interval(|r| r.alpha),
        band,
        replicates: opts.replicates,
        degenerate,
        seed: opts.seed,
        replicate_fits: kept.into_iter().map(|(r, _)| r).collect(),
    };

    if degenerate * 5 > opts.replicates {
        return Err(Error::UnstableBootstrap {
            degenerate,
            replicates: opts.replicates,
            partial: Box::new(report),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::powerlaw::sample_tail;

    fn power_law_series(seed: u64, n: usize) -> PeakSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PeakSeries::from_values(sample_tail(1.0, 2.5, n, &mut rng).unwrap()).unwrap()
    }

    fn run(seed: u64, replicates: usize, level: f64, grid: Vec<f64>) -> CiReport {
        let series = power_law_series(31, 300);
        bootstrap_ci(
            &series,
            &BootstrapOptions {
                replicates,
                level,
                seed,
                min_tail: 10,
                band_grid: grid,
            },
        )
        .unwrap()
    }

    #[test]
    fn validation_errors() {
        let series = power_law_series(1, 100);
        let bad_count = BootstrapOptions {
            replicates: 50,
            ..BootstrapOptions::default()
        };
        assert!(matches!(
            bootstrap_ci(&series, &bad_count),
            Err(Error::TooFewReplicates { .. })
        ));
        let bad_level = BootstrapOptions {
            replicates: 100,
            level: 0.4,
            ..BootstrapOptions::default()
        };
        assert!(matches!(
            bootstrap_ci(&series, &bad_level),
            Err(Error::InvalidLevel { .. })
        ));
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let a = run(4, 100, 0.95, vec![1.0, 2.0, 5.0]);
        let b = run(4, 100, 0.95, vec![1.0, 2.0, 5.0]);
        assert_eq!(a, b);
    }

    #[test]
    fn endpoints_are_order_statistics() {
        // At level 0.95 with 100 replicates the nearest-rank rule picks
        // the 3rd and 98th order statistics.
        let report = run(7, 100, 0.95, vec![]);
        assert_eq!(report.degenerate, 0);
        let mut alphas: Vec<f64> = report.replicate_fits.iter().map(|r| r.alpha).collect();
        alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(report.alpha_interval.0, alphas[2]);
        assert_eq!(report.alpha_interval.1, alphas[97]);
        let mut xmins: Vec<f64> = report.replicate_fits.iter().map(|r| r.x_min).collect();
        xmins.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(report.xmin_interval.0, xmins[2]);
        assert_eq!(report.xmin_interval.1, xmins[97]);
    }

    #[test]
    fn narrower_level_nests_inside_wider() {
        let wide = run(12, 200, 0.95, vec![]);
        let narrow = run(12, 200, 0.90, vec![]);
        assert!(narrow.alpha_interval.0 >= wide.alpha_interval.0);
        assert!(narrow.alpha_interval.1 <= wide.alpha_interval.1);
        assert!(narrow.xmin_interval.0 >= wide.xmin_interval.0);
        assert!(narrow.xmin_interval.1 <= wide.xmin_interval.1);
    }

    #[test]
    fn band_brackets_the_point_estimate() {
        let grid: Vec<f64> = (1..40).map(|i| 0.5 + i as f64 * 0.25).collect();
        let report = run(9, 100, 0.95, grid);
        for bp in &report.band {
            assert!(bp.low <= bp.high);
            assert!((0.0..=1.0).contains(&bp.low) && (0.0..=1.0).contains(&bp.high));
            if let Some(p) = bp.point {
                assert!(bp.low <= p && p <= bp.high, "band misses point at {}", bp.x);
            }
        }
    }

    #[test]
    fn band_at_matches_level_and_brackets_w() {
        let report = run(15, 100, 0.95, vec![]);
        let (lo, hi) = report.band_at(2.0).unwrap();
        assert!(lo <= hi);
        assert!(lo >= 0.0 && hi <= 1.0);
        assert!(report.band_at(f64::NAN).is_none());
    }

    #[test]
    fn exceedance_band_brackets_the_point_estimate() {
        use crate::powerlaw::exceedance_query;
        use crate::tailscan::{scan_xmin, CandidateRule};

        let series = power_law_series(60, 400);
        let fit = scan_xmin(&series, 10, CandidateRule::AllUnique)
            .unwrap()
            .best;
        let report = bootstrap_ci(
            &series,
            &BootstrapOptions {
                replicates: 150,
                seed: 3,
                ..BootstrapOptions::default()
            },
        )
        .unwrap();

        // At the threshold the point estimate is exactly w.
        let (p, band) = exceedance_query(&fit, fit.x_min, Some(&report)).unwrap();
        assert_eq!(p, fit.w);
        let (lo, hi) = band.unwrap();
        assert!(lo <= fit.w && fit.w <= hi);

        // Deeper in the tail the band still brackets the point.
        let x = fit.x_min * 3.0;
        let (p, band) = exceedance_query(&fit, x, Some(&report)).unwrap();
        let (lo, hi) = band.unwrap();
        assert!(lo <= p && p <= hi);
        assert!(hi < fit.w);
    }

    #[test]
    fn unstable_resamples_surface_as_an_error() {
        // Ten identical values plus two extremes: the original scan
        // works, but resamples often lose both extremes and degenerate.
        let mut values = vec![1.0; 10];
        values.push(2.0);
        values.push(3.0);
        let series = PeakSeries::from_values(values).unwrap();
        let opts = BootstrapOptions {
            replicates: 100,
            seed: 2,
            ..BootstrapOptions::default()
        };
        match bootstrap_ci(&series, &opts) {
            Err(Error::UnstableBootstrap {
                degenerate,
                replicates,
                partial,
            }) => {
                assert!(degenerate * 5 > replicates, "degenerate = {degenerate}");
                assert_eq!(
                    partial.replicate_fits.len() + degenerate,
                    replicates
                );
            }
            other => panic!("expected UnstableBootstrap, got {other:?}"),
        }
    }

    #[test]
    fn parallel_and_sequential_replicates_agree() {
        let series = power_law_series(50, 200);
        let opts = BootstrapOptions {
            replicates: 100,
            seed: 8,
            band_grid: vec![1.5, 3.0],
            ..BootstrapOptions::default()
        };
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let seq = pool1.install(|| bootstrap_ci(&series, &opts).unwrap());
        let par = pool4.install(|| bootstrap_ci(&series, &opts).unwrap());
        assert_eq!(seq, par);
    }
}
