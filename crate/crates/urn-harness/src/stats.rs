//! Summary statistics, verdicts and the Kolmogorov–Smirnov test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Outcome of a single check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Skip,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_fail(self) -> bool {
        self == Verdict::Fail
    }
}

/// Empirical mean, variance and standard errors of one quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityStats {
    pub name: String,
    pub mean: f64,
    /// Unbiased sample variance, absent for a single replicate.
    pub variance: Option<f64>,
    /// Standard error of the mean.
    pub stderr: Option<f64>,
    /// Standard error of the sample variance.
    pub variance_stderr: Option<f64>,
}

impl QuantityStats {
    /// Two-pass statistics over values in replicate order.
    pub fn from_values(name: &str, values: &[f64]) -> Self {
        let r = values.len() as f64;
        let mean = values.iter().sum::<f64>() / r;
        let (variance, stderr, variance_stderr) = if values.len() > 1 {
            let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
            let m4 = values.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / r;
            (Some(var), Some((var / r).sqrt()), Some(((m4 - var * var).max(0.0) / r).sqrt()))
        } else {
            (None, None, None)
        };
        Self { name: name.into(), mean, variance, stderr, variance_stderr }
    }
}

/// Slack of `3·√(b(1-b)/R)` allowed above a probability bound `b`.
pub fn binomial_slack(bound: f64, replicates: usize) -> f64 {
    let b = bound.clamp(0.0, 1.0);
    3.0 * (b * (1.0 - b) / replicates as f64).sqrt()
}

/// PASS iff `empirical <= bound + 3·√(bound(1-bound)/R)`.
pub fn tail_verdict(empirical: f64, bound: f64, replicates: usize) -> (f64, Verdict) {
    let slack = binomial_slack(bound, replicates);
    (slack, Verdict::from_bool(empirical <= bound + slack))
}

/// One-sample Kolmogorov–Smirnov test against the standard normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub sample_size: usize,
}

pub fn ks_standard_normal(values: &[f64]) -> KsTest {
    let normal = Normal::standard();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / r).max((i + 1) as f64 / r - f)
        })
        .fold(0.0, f64::max);
    let sqrt_r = r.sqrt();
    let lambda = (sqrt_r + 0.12 + 0.11 / sqrt_r) * statistic;
    KsTest { statistic, p_value: kolmogorov_survival(lambda), sample_size: sorted.len() }
}

/// `P{K > λ}` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_replicate_has_no_variance() {
        let s = QuantityStats::from_values("x", &[3.0]);
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.variance, None);
    }

    #[test]
    fn kolmogorov_reference_values() {
        assert!((kolmogorov_survival(1.0) - 0.269_999_671_677_73).abs() < 1e-10);
        assert!((kolmogorov_survival(1.628) - 0.01).abs() < 2e-4);
    }

    #[test]
    fn ks_detects_shift() {
        let grid: Vec<f64> = (1..2000).map(|i| {
            let u = i as f64 / 2000.0;
            Normal::standard().inverse_cdf(u)
        }).collect();
        assert!(ks_standard_normal(&grid).p_value > 0.99);
        let shifted: Vec<f64> = grid.iter().map(|x| x + 0.3).collect();
        assert!(ks_standard_normal(&shifted).p_value < 1e-6);
    }

    #[test]
    fn verdict_slack() {
        let (slack, v) = tail_verdict(0.38, 0.3679, 10_000);
        assert!((slack - 3.0 * (0.3679f64 * 0.6321 / 1e4).sqrt()).abs() < 1e-15);
        assert_eq!(v, Verdict::Pass);
        assert_eq!(tail_verdict(0.4, 0.3679, 10_000).1, Verdict::Fail);
    }
}
