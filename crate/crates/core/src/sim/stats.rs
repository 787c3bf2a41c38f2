//! Confidence intervals and distribution distances for Monte Carlo output.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean with the half-width of a two-sided Student-t confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub halfwidth: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn lower(&self) -> f64 {
        self.mean - self.halfwidth
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.halfwidth
    }

    /// The interval lies strictly above zero.
    pub fn is_positive(&self) -> bool {
        self.lower() > 0.0
    }

    pub fn overlaps(&self, other: &Estimate) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample standard deviation; zero for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Student-t interval at `level` (e.g. 0.95). A single value gets an infinite half-width.
pub fn mean_ci(values: &[f64], level: f64) -> Estimate {
    assert!(!values.is_empty(), "confidence interval of an empty sample");
    assert!(level > 0.0 && level < 1.0);
    let n = values.len();
    let halfwidth = if n < 2 {
        f64::INFINITY
    } else {
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("degrees of freedom ≥ 1");
        t.inverse_cdf(0.5 + level / 2.0) * std_dev(values) / (n as f64).sqrt()
    };
    Estimate { mean: mean(values), halfwidth, samples: n }
}

/// Interval for the mean of `a[i] − b[i]` over paired samples.
pub fn paired_difference(a: &[f64], b: &[f64], level: f64) -> Estimate {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_ci(&d, level)
}

/// `sup_x |F_n(x) − F(x)|` for the empirical CDF of `samples`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |worst: f64, (i, &x)| {
        let f = cdf(x);
        worst.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Empirical quantile by the nearest-rank rule on sorted samples.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty() && p > 0.0 && p < 1.0);
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}
