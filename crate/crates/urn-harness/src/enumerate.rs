//! Exhaustive enumeration of small urn samples, used as an exact oracle.

use urn_core::{FrequencyModel, Result, UrnError};

/// Largest support and sample size accepted by [`Enumeration::binomial`].
pub const MAX_SUPPORT: u64 = 4;
pub const MAX_N: u32 = 4;

/// One outcome vector, collapsed to its symbol counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub counts: Vec<u32>,
}

/// All `k^n` ordered draws of a small binomial sample.
#[derive(Debug, Clone)]
pub struct Enumeration {
    pub probs: Vec<f64>,
    pub n: u32,
    pub outcomes: Vec<Outcome>,
}

impl Enumeration {
    pub fn binomial(model: &FrequencyModel, n: u32) -> Result<Self> {
        let k = model
            .support()
            .filter(|&k| k <= MAX_SUPPORT)
            .ok_or_else(|| UrnError::Domain(format!("enumeration needs a support of at most {MAX_SUPPORT} symbols")))?;
        if n > MAX_N {
            return Err(UrnError::Domain(format!("enumeration needs n <= {MAX_N}, got {n}")));
        }
        let probs = (1..=k).map(|j| model.prob(j)).collect::<Result<Vec<_>>>()?;
        let k = k as usize;
        let outcomes = (0..k.pow(n))
            .map(|mut code| {
                let mut counts = vec![0u32; k];
                let mut prob = 1.0;
                for _ in 0..n {
                    let j = code % k;
                    counts[j] += 1;
                    prob *= probs[j];
                    code /= k;
                }
                Outcome { prob, counts }
            })
            .collect();
        Ok(Self { probs, n, outcomes })
    }

    pub fn expectation(&self, f: impl Fn(&Outcome) -> f64) -> f64 {
        self.outcomes.iter().map(|o| o.prob * f(o)).sum()
    }

    pub fn variance(&self, f: impl Fn(&Outcome) -> f64) -> f64 {
        let mean = self.expectation(&f);
        self.expectation(|o| (f(o) - mean).powi(2))
    }

    /// `log E exp(λ(Z - EZ))`.
    pub fn centered_log_mgf(&self, f: impl Fn(&Outcome) -> f64, lambda: f64) -> f64 {
        let mean = self.expectation(&f);
        self.expectation(|o| (lambda * (f(o) - mean)).exp()).ln()
    }

    /// `K_{n,r}` of an outcome.
    pub fn occupancy(o: &Outcome, r: u32) -> f64 {
        o.counts.iter().filter(|&&x| x == r).count() as f64
    }

    /// `K_{n,r̄}` of an outcome.
    pub fn cumulative(o: &Outcome, r: u32) -> f64 {
        o.counts.iter().filter(|&&x| x >= r).count() as f64
    }

    /// `M_{n,r}` of an outcome.
    pub fn mass(&self, o: &Outcome, r: u32) -> f64 {
        o.counts.iter().zip(&self.probs).filter(|(&x, _)| x == r).map(|(_, p)| p).sum()
    }
}

/// `log E exp(λ(G_0(t) - M_0(t)))` in the Poisson setting, exact through
/// the per-symbol independence of Poissonized counts (`E[G_0 - M_0] = 0`).
pub fn poisson_gap_log_mgf(probs: &[f64], t: f64, lambda: f64) -> f64 {
    probs
        .iter()
        .map(|&p| {
            let x = t * p;
            let e = (-x).exp();
            let rest = 1.0 - e - x * e;
            (e * (-lambda * p).exp() + x * e * (lambda / t).exp() + rest).ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_two_of_two() {
        let m = FrequencyModel::uniform(2).unwrap();
        let e = Enumeration::binomial(&m, 2).unwrap();
        assert_eq!(e.outcomes.len(), 4);
        assert!((e.expectation(|o| Enumeration::cumulative(o, 1)) - 1.5).abs() < 1e-15);
        assert!((e.variance(|o| Enumeration::cumulative(o, 1)) - 0.25).abs() < 1e-15);
        assert!((e.expectation(|o| e.mass(o, 0)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_large_instances() {
        assert!(Enumeration::binomial(&FrequencyModel::uniform(5).unwrap(), 2).is_err());
        assert!(Enumeration::binomial(&FrequencyModel::uniform(2).unwrap(), 5).is_err());
        assert!(Enumeration::binomial(&FrequencyModel::zipf(2.0).unwrap(), 2).is_err());
    }

    #[test]
    fn poisson_gap_mgf_matches_truncated_sum() {
        let probs = [0.6, 0.3, 0.1];
        let (t, lambda) = (2.5, 0.7);
        let direct: f64 = probs
            .iter()
            .map(|&p| {
                let x: f64 = t * p;
                let mut acc = 0.0;
                let mut pmf = (-x).exp();
                for c in 0..60u32 {
                    let z = if c == 0 { -p } else if c == 1 { 1.0 / t } else { 0.0 };
                    acc += pmf * (lambda * z).exp();
                    pmf *= x / (c + 1) as f64;
                }
                acc.ln()
            })
            .sum();
        assert!((poisson_gap_log_mgf(&probs, t, lambda) - direct).abs() < 1e-14);
    }
}
