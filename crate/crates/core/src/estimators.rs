//! Sample dispersion statistics: the distance variance V-statistic and its
//! components, the unbiased-component variant, Gini mean difference, sample
//! variance and the mean deviation about the median.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::samples::{distance, pairwise_distance_row_sums, sort_univariate, Sample};
use crate::sum::{pairwise_sum, pairwise_sum_by};

/// Components of the sample distance variance for one sample.
///
/// `t1n`, `t2n`, `t3n` are the V-statistic versions of `E‖X−X'‖²`,
/// `(E‖X−X'‖)²` and `E‖X−X'‖‖X−X''‖`; `v_sq = t1n + t2n − 2 t3n = wn + delta_n²`.
/// The unbiased fields are `None` when `n` is too small to define them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorBreakdown {
    pub n: usize,
    pub p: usize,
    pub t1n: f64,
    pub t2n: f64,
    pub t3n: f64,
    pub wn: f64,
    pub delta_n: f64,
    pub v_sq: f64,
    /// Unbiased Gini mean difference, `n ≥ 2`.
    pub delta_hat_n: Option<f64>,
    /// Unbiased version of `W`, `n ≥ 3`.
    pub w_hat_n: Option<f64>,
    /// `ŵn + delta_hat_n²`, `n ≥ 3`. Can be negative.
    pub v_sq_hat: Option<f64>,
}

pub fn breakdown(s: &Sample) -> EstimatorBreakdown {
    let rs = pairwise_distance_row_sums(s);
    let n = s.n();
    let nf = n as f64;
    let delta_n = rs.total / (nf * nf);
    let t1n = rs.total_squared / (nf * nf);
    let t2n = delta_n * delta_n;
    let t3n = pairwise_sum_by(0, n, &|i| rs.row_sums[i] * rs.row_sums[i]) / (nf * nf * nf);
    let wn = t1n - 2.0 * t3n;
    let v_sq = wn + t2n;

    let delta_hat_n = (n >= 2).then(|| rs.total / (nf * (nf - 1.0)));
    let w_hat_n = (n >= 3).then(|| nf * nf * wn / ((nf - 1.0) * (nf - 2.0)));
    let v_sq_hat = match (w_hat_n, delta_hat_n) {
        (Some(w), Some(d)) => Some(w + d * d),
        _ => None,
    };
    EstimatorBreakdown {
        n,
        p: s.p(),
        t1n,
        t2n,
        t3n,
        wn,
        delta_n,
        v_sq,
        delta_hat_n,
        w_hat_n,
        v_sq_hat,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdVariant {
    /// Square root of the V-statistic `V_n²`.
    Vstat,
    /// Square root of `Ŵ_n + Δ̂_n²`.
    UnbiasedComponents,
}

/// A distance standard deviation, with a flag set when the squared value was
/// negative and had to be clamped to zero before taking the root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceSd {
    pub value: f64,
    pub clamped: bool,
}

impl DistanceSd {
    fn from_squared(v_sq: f64) -> Self {
        if v_sq < 0.0 {
            DistanceSd {
                value: 0.0,
                clamped: true,
            }
        } else {
            DistanceSd {
                value: v_sq.sqrt(),
                clamped: false,
            }
        }
    }
}

impl EstimatorBreakdown {
    pub fn distance_sd(&self, variant: SdVariant) -> Result<DistanceSd> {
        match variant {
            // V_n² ≥ 0 mathematically; only rounding can push it below zero.
            SdVariant::Vstat => Ok(DistanceSd {
                value: self.v_sq.max(0.0).sqrt(),
                clamped: false,
            }),
            SdVariant::UnbiasedComponents => self
                .v_sq_hat
                .map(DistanceSd::from_squared)
                .ok_or(Error::TooSmall {
                    what: "unbiased distance standard deviation",
                    min: 3,
                    n: self.n,
                }),
        }
    }
}

pub fn distance_sd(s: &Sample, variant: SdVariant) -> Result<DistanceSd> {
    breakdown(s).distance_sd(variant)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GiniVariant {
    /// `Σ_{i,j} ‖X_i − X_j‖ / n²`.
    Biased,
    /// `Σ_{i,j} ‖X_i − X_j‖ / (n(n−1))`.
    Unbiased,
}

pub fn gini_mean_difference(s: &Sample, variant: GiniVariant) -> Result<f64> {
    let n = s.n() as f64;
    match variant {
        GiniVariant::Biased => Ok(pairwise_distance_row_sums(s).total / (n * n)),
        GiniVariant::Unbiased => {
            if s.n() < 2 {
                return Err(Error::TooSmall {
                    what: "unbiased Gini mean difference",
                    min: 2,
                    n: s.n(),
                });
            }
            Ok(pairwise_distance_row_sums(s).total / (n * (n - 1.0)))
        }
    }
}

fn sum_sq_dev(xs: &[f64]) -> f64 {
    let mean = pairwise_sum(xs) / xs.len() as f64;
    pairwise_sum_by(0, xs.len(), &|i| (xs[i] - mean) * (xs[i] - mean))
}

fn require_two(s: &Sample, what: &'static str) -> Result<()> {
    if s.n() < 2 {
        return Err(Error::TooSmall { what, min: 2, n: s.n() });
    }
    Ok(())
}

/// `Σ (X_i − X̄)² / (n(n−1))`, the normalization printed alongside the
/// spacings quadratic forms. See [`sample_variance_standard`] for the usual one.
pub fn sample_variance(s: &Sample) -> Result<f64> {
    let xs = s.values()?;
    require_two(s, "sample variance")?;
    let n = xs.len() as f64;
    Ok(sum_sq_dev(xs) / (n * (n - 1.0)))
}

/// `Σ (X_i − X̄)² / (n−1)`.
pub fn sample_variance_standard(s: &Sample) -> Result<f64> {
    let xs = s.values()?;
    require_two(s, "sample variance")?;
    Ok(sum_sq_dev(xs) / (xs.len() as f64 - 1.0))
}

/// Mean absolute deviation about the sample median.
pub fn mean_deviation(s: &Sample) -> Result<f64> {
    let sorted = sort_univariate(s)?;
    let m = sorted.median();
    let xs = sorted.values();
    Ok(pairwise_sum_by(0, xs.len(), &|i| (xs[i] - m).abs()) / xs.len() as f64)
}

pub const BRUTE_FORCE_MAX_N: usize = 2000;

/// `V_n²` by the literal triple sum. Exists as a reference for [`breakdown`].
pub fn brute_force_vsq(s: &Sample) -> Result<f64> {
    let n = s.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge {
            what: "brute-force distance variance",
            max: BRUTE_FORCE_MAX_N,
            n,
        });
    }
    let d = |i: usize, j: usize| distance(s.row(i), s.row(j));
    let mut t1 = 0.0;
    let mut t2 = 0.0;
    let mut t3 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let dij = d(i, j);
            t1 += dij * dij;
            t2 += dij;
            for k in 0..n {
                t3 += dij * d(i, k);
            }
        }
    }
    let nf = n as f64;
    let t1 = t1 / (nf * nf);
    let t2 = (t2 / (nf * nf)).powi(2);
    let t3 = t3 / (nf * nf * nf);
    Ok(t1 + t2 - 2.0 * t3)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uni(v: &[f64]) -> Sample {
        Sample::univariate(v.to_vec()).unwrap()
    }

    #[test]
    fn two_point_breakdown() {
        let b = breakdown(&uni(&[0.0, 1.0]));
        assert_eq!((b.t1n, b.t2n, b.t3n, b.v_sq), (0.5, 0.25, 0.25, 0.25));
        assert_eq!(b.delta_hat_n, Some(1.0));
        assert_eq!(b.w_hat_n, None);
        assert_eq!(b.v_sq_hat, None);
        assert_eq!(distance_sd(&uni(&[0.0, 1.0]), SdVariant::Vstat).unwrap().value, 0.5);
        assert!(distance_sd(&uni(&[0.0, 1.0]), SdVariant::UnbiasedComponents).is_err());
    }

    #[test]
    fn constant_sample_is_all_zero() {
        for n in [1, 2, 5, 40] {
            let b = breakdown(&uni(&vec![3.25; n]));
            assert_eq!((b.t1n, b.t2n, b.t3n, b.wn, b.delta_n, b.v_sq), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
            if n >= 3 {
                assert_eq!(b.v_sq_hat, Some(0.0));
            }
        }
    }

    #[test]
    fn bernoulli_empirical_measure() {
        for (k, n) in [(1usize, 2usize), (3, 10), (7, 9), (1, 50)] {
            let mut v = vec![0.0; k];
            v.extend(std::iter::repeat(1.0).take(n - k));
            let s = uni(&v);
            let p = k as f64 / n as f64;
            let want = 4.0 * p * p * (1.0 - p) * (1.0 - p);
            let b = breakdown(&s);
            assert!((b.v_sq - want).abs() <= 1e-14, "k={k} n={n}");
            assert!((brute_force_vsq(&s).unwrap() - want).abs() <= 1e-14);
            assert!((b.v_sq - b.t2n).abs() <= 1e-14);
        }
    }

    #[test]
    fn clamp_flag_on_negative_unbiased() {
        // n = 3 with one far point: Ŵ is strongly negative.
        let b = breakdown(&uni(&[0.0, 0.0, 1.0]));
        let v = b.v_sq_hat.unwrap();
        let sd = b.distance_sd(SdVariant::UnbiasedComponents).unwrap();
        if v < 0.0 {
            assert!(sd.clamped);
            assert_eq!(sd.value, 0.0);
        } else {
            assert!(!sd.clamped);
        }
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini_mean_difference(&uni(&[0.0, 1.0]), GiniVariant::Unbiased).unwrap(), 1.0);
        assert_eq!(gini_mean_difference(&uni(&[0.0, 1.0]), GiniVariant::Biased).unwrap(), 0.5);
        assert_eq!(gini_mean_difference(&uni(&[0.0, 3.0, 6.0]), GiniVariant::Unbiased).unwrap(), 4.0);
        assert!(gini_mean_difference(&uni(&[1.0]), GiniVariant::Unbiased).is_err());
        let planar = Sample::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(gini_mean_difference(&planar, GiniVariant::Unbiased).unwrap(), 5.0);
    }

    #[test]
    fn variance_examples() {
        assert_eq!(sample_variance(&uni(&[0.0, 1.0])).unwrap(), 0.25);
        assert_eq!(sample_variance_standard(&uni(&[0.0, 1.0])).unwrap(), 0.5);
        assert_eq!(sample_variance(&uni(&[2.0, 2.0, 2.0])).unwrap(), 0.0);
        assert!(sample_variance(&uni(&[2.0])).is_err());
    }

    #[test]
    fn mean_deviation_examples() {
        assert_eq!(mean_deviation(&uni(&[0.0, 1.0])).unwrap(), 0.5);
        assert_eq!(mean_deviation(&uni(&[4.0, 4.0])).unwrap(), 0.0);
        assert_eq!(mean_deviation(&uni(&[0.0, 0.0, 3.0])).unwrap(), 1.0);
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_vsq(&uni(&[0.0, 1.0])).unwrap(), 0.25);
        let tri = Sample::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let fast = breakdown(&tri).v_sq;
        assert!((brute_force_vsq(&tri).unwrap() - fast).abs() <= 1e-12 * fast);
        let big = uni(&vec![0.0; BRUTE_FORCE_MAX_N + 1]);
        assert!(matches!(brute_force_vsq(&big), Err(Error::TooLarge { .. })));
    }
}
