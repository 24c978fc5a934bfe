//! Estimators computed from an occupancy profile alone: Good–Turing masses
//! and confidence intervals, the regular-variation index and species
//! discovery forecasts.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, UrnError};
use crate::moments::{MomentReport, Setting};
use crate::sampler::{OccupancyProfile, ProfileSetting};

/// A point estimate with confidence interval endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub name: String,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    /// Failure budget per tail event.
    pub delta: f64,
    pub coverage_target: f64,
    /// Whether an endpoint was clipped to `[0, 1]`.
    pub clipped: bool,
    /// SHA-256 of the profile counts and parameters.
    pub inputs_digest: String,
}

/// SHA-256 hex digest of a profile's counts and a parameter string.
pub fn inputs_digest(profile: &OccupancyProfile, params: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("{:?};", profile.setting()).as_bytes());
    for (j, x) in profile.counts() {
        hasher.update(format!("{j}:{x},").as_bytes());
    }
    hasher.update(params.as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn denominator(profile: &OccupancyProfile) -> Result<f64> {
    let d = match profile.setting() {
        ProfileSetting::Binomial { n } => n as f64,
        ProfileSetting::Poisson { t, .. } => t,
    };
    if d > 0.0 {
        Ok(d)
    } else {
        Err(UrnError::Domain("Good–Turing estimates need a non-empty sample".into()))
    }
}

/// `G_{n,r} = (r+1) K_{n,r+1} / n`; Poisson profiles divide by the intensity `t`.
pub fn good_turing(profile: &OccupancyProfile, r: u64) -> Result<f64> {
    Ok((r + 1) as f64 * profile.occupancy(r + 1) as f64 / denominator(profile)?)
}

/// Confidence interval for the missing mass `M_0(t)` of a Poissonized
/// sample with known intensity `t`, covering with probability `>= 1 - 4δ`.
///
/// A binomial profile is accepted as a sample of Poisson size with the
/// declared `t`; a Poisson profile must record the same `t`.
pub fn gt_ci_poisson(profile: &OccupancyProfile, t: f64, delta: f64) -> Result<EstimateWithCI> {
    if !(delta > 0.0 && delta < 0.25) {
        return Err(UrnError::Domain(format!("δ must lie in (0, 1/4) for a non-vacuous interval, got {delta}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(UrnError::Domain(format!("intensity must be positive, got {t}")));
    }
    if let ProfileSetting::Poisson { t: recorded, .. } = profile.setting() {
        if recorded != t {
            return Err(UrnError::Setting(format!("profile was drawn at t = {recorded}, not {t}")));
        }
    }
    let k = profile.distinct() as f64;
    let k1 = profile.occupancy(1) as f64;
    let k2 = profile.occupancy(2) as f64;
    let point = k1 / t;
    let log_inv = -delta.ln();
    let upper_raw = point + ((6.0 * k * log_inv).sqrt() + 5.0 * log_inv) / t;
    let lower_raw = point - ((2.0 * (k1 + 2.0 * k2) * log_inv).sqrt() + 4.0 * log_inv) / t;
    let (lower, upper) = (lower_raw.clamp(0.0, 1.0), upper_raw.clamp(0.0, 1.0));
    Ok(EstimateWithCI {
        name: "missing_mass".into(),
        point,
        lower,
        upper,
        delta,
        coverage_target: 1.0 - 4.0 * delta,
        clipped: lower != lower_raw || upper != upper_raw,
        inputs_digest: inputs_digest(profile, &format!("t={t};delta={delta}")),
    })
}

/// `α̂ = r K_{n,r} / K_{n,r̄}`, or `None` when no symbol reached level `r`.
pub fn alpha_hat(profile: &OccupancyProfile, r: u64) -> Option<f64> {
    let cumulative = profile.cumulative(r);
    (r >= 1 && cumulative > 0).then(|| r as f64 * profile.occupancy(r) as f64 / cumulative as f64)
}

/// Occupancy statistic a species forecast is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeciesBasis {
    /// `K_n`.
    Distinct,
    /// `K_{n,r}` for `r >= 1`.
    Level(u64),
}

/// Growth regime declared by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum SpeciesRegime {
    /// Regular variation with estimated index in `(0, 1]`.
    PowerLaw { alpha_hat: f64 },
    /// Slow variation in the de Haan class.
    SlowVariation,
}

/// Predicted number of new symbols when the sample grows from `n` to `τn`.
pub fn species_estimate(profile: &OccupancyProfile, tau: f64, basis: SpeciesBasis, regime: SpeciesRegime) -> Result<f64> {
    if !(tau > 1.0 && tau.is_finite()) {
        return Err(UrnError::Domain(format!("growth factor must exceed 1, got {tau}")));
    }
    match (regime, basis) {
        (SpeciesRegime::PowerLaw { alpha_hat: a }, basis) => {
            if !(a > 0.0 && a <= 1.0) {
                return Err(UrnError::Domain(format!("α̂ must lie in (0, 1], got {a}")));
            }
            let growth = tau.powf(a) - 1.0;
            match basis {
                SpeciesBasis::Distinct => Ok(growth * profile.distinct() as f64),
                SpeciesBasis::Level(0) => Err(UrnError::Domain("occupancy level must be at least 1".into())),
                SpeciesBasis::Level(r) => {
                    let mut factor = 1.0;
                    for k in 2..=r {
                        let denom = k as f64 - 1.0 - a;
                        if denom <= 0.0 {
                            return Err(UrnError::Singular(format!("k − 1 − α̂ = {denom} at k = {k}; use the K_{{n,1}} form")));
                        }
                        factor *= k as f64 / denom;
                    }
                    Ok(factor * growth / a * profile.occupancy(r) as f64)
                }
            }
        }
        (SpeciesRegime::SlowVariation, SpeciesBasis::Level(r)) if r >= 1 => Ok(tau.ln() * r as f64 * profile.occupancy(r) as f64),
        (SpeciesRegime::SlowVariation, _) => Err(UrnError::Domain("the slow-variation forecast needs a level r >= 1".into())),
    }
}

/// Covariance of `(G_0(t), M_0(t))` in the Poisson setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtMmCovariance {
    pub var_g: f64,
    pub var_m: f64,
    pub cov: f64,
}

/// `diag(E K_1(t), 2 E K_2(t))/t² − E K_2(2t)/(2t²)` on every entry, from
/// Poisson moment reports at `t` and `2t` with `rmax >= 2`.
pub fn gt_mm_covariance_poisson(at_t: &MomentReport, at_2t: &MomentReport) -> Result<GtMmCovariance> {
    let t = poisson_intensity(at_t)?;
    let t2 = poisson_intensity(at_2t)?;
    if t2 != 2.0 * t {
        return Err(UrnError::Setting(format!("second report must be at 2t = {}, got {t2}", 2.0 * t)));
    }
    let scale = t * t;
    let shared = at_2t.occupancy(2)? / (2.0 * scale);
    Ok(GtMmCovariance {
        var_g: at_t.occupancy(1)? / scale - shared,
        var_m: 2.0 * at_t.occupancy(2)? / scale - shared,
        cov: -shared,
    })
}

/// `E K_1(t) / √(E K_1(t) + 2 E K_2(t))`, the scaling of `G_0(t)/M_0(t) − 1`.
pub fn clt_normalizer(report: &MomentReport) -> Result<f64> {
    poisson_intensity(report)?;
    let k1 = report.occupancy(1)?;
    let k2 = report.occupancy(2)?;
    let denom = (k1 + 2.0 * k2).sqrt();
    if denom > 0.0 {
        Ok(k1 / denom)
    } else {
        Err(UrnError::Singular("E K_1(t) + 2 E K_2(t) vanishes".into()))
    }
}

fn poisson_intensity(report: &MomentReport) -> Result<f64> {
    match report.setting {
        Setting::Poisson { t } => Ok(t),
        Setting::Binomial { .. } => Err(UrnError::Setting("Poisson moments required".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq_models::FrequencyModel;
    use crate::moments::{expected_mass, moment_report};
    use crate::sampler::{replicate_rng, sample_binomial_with};
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn observed(pairs: &[(u64, u64)]) -> OccupancyProfile {
        OccupancyProfile::from_observed(pairs.iter().copied()).unwrap()
    }

    /// Profile with `k_r` symbols at each level `r`.
    fn with_profile(levels: &[(u64, u64)]) -> OccupancyProfile {
        let mut next = 1;
        let mut pairs = Vec::new();
        for &(r, k) in levels {
            for _ in 0..k {
                pairs.push((next, r));
                next += 1;
            }
        }
        observed(&pairs)
    }

    #[test]
    fn good_turing_definition() {
        let mut levels = vec![(1, 3)];
        levels.push((7, 1));
        let p = with_profile(&levels);
        assert_eq!(p.n(), 10);
        assert_relative_eq!(good_turing(&p, 0).unwrap(), 0.3);
        let p = with_profile(&[(2, 2), (6, 1)]);
        assert_relative_eq!(good_turing(&p, 1).unwrap(), 0.4);
        assert!(good_turing(&observed(&[]), 0).is_err());
    }

    #[test]
    fn good_turing_mean_matches_shifted_missing_mass() {
        let m = FrequencyModel::uniform(2).unwrap();
        let g: Vec<f64> = (0..100_000).map(|i| good_turing(&sample_binomial_with(&m, 10, &mut replicate_rng(21, i)), 0).unwrap()).collect();
        let n = g.len() as f64;
        let mean = g.iter().sum::<f64>() / n;
        let se = (g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let target = expected_mass(&m, Setting::Binomial { n: 9 }, 0, 1e-12).unwrap().value;
        assert_relative_eq!(target, 2.0f64.powi(-9), max_relative = 1e-14);
        assert!((mean - target).abs() <= 3.0 * se);
    }

    #[test]
    fn ci_radius_example() {
        let p = with_profile(&[(1, 30), (2, 10), (3, 10)]);
        assert_eq!(p.distinct(), 50);
        let ci = gt_ci_poisson(&p, 100.0, 0.05).unwrap();
        let log20 = 20f64.ln();
        let radius = ((6.0 * 50.0 * log20).sqrt() + 5.0 * log20) / 100.0;
        assert_relative_eq!(radius, 0.4496, max_relative = 1e-4);
        assert_relative_eq!(ci.point, 0.3);
        assert_relative_eq!(ci.upper, 0.3 + radius, max_relative = 1e-14);
        let lower_radius = ((2.0 * (30.0 + 20.0) * log20).sqrt() + 4.0 * log20) / 100.0;
        assert_relative_eq!(ci.lower, 0.3 - lower_radius, max_relative = 1e-12);
        assert!(!ci.clipped);
        let sparse = with_profile(&[(1, 3), (9, 1)]);
        let clipped = gt_ci_poisson(&sparse, 12.0, 0.05).unwrap();
        assert!(clipped.clipped && clipped.lower == 0.0 && clipped.upper == 1.0);
        assert_relative_eq!(ci.coverage_target, 0.8, max_relative = 1e-15);
        assert_eq!(ci.inputs_digest.len(), 64);
        assert!(gt_ci_poisson(&p, 100.0, 0.25).is_err());
    }

    #[test]
    fn ci_monotone_in_confidence() {
        let p = with_profile(&[(1, 300), (2, 100), (5, 40)]);
        let wide = gt_ci_poisson(&p, 10_000.0, 1e-6).unwrap();
        let narrow = gt_ci_poisson(&p, 10_000.0, 0.2).unwrap();
        assert!(wide.upper > narrow.upper && wide.lower < narrow.lower);
    }

    #[test]
    fn alpha_hat_definition() {
        let p = with_profile(&[(1, 5), (3, 5)]);
        assert_relative_eq!(alpha_hat(&p, 1).unwrap(), 0.5);
        let p = with_profile(&[(1, 4), (2, 3), (4, 3)]);
        assert_relative_eq!(alpha_hat(&p, 2).unwrap(), 1.0);
        assert_eq!(alpha_hat(&p, 9), None);
    }

    #[test]
    fn species_examples() {
        let p = with_profile(&[(1, 100), (2, 7)]);
        let d = species_estimate(&p, 2.0, SpeciesBasis::Distinct, SpeciesRegime::PowerLaw { alpha_hat: 1.0 }).unwrap();
        assert_relative_eq!(d, 107.0);
        let s = species_estimate(&p, 2.0, SpeciesBasis::Level(1), SpeciesRegime::PowerLaw { alpha_hat: 0.5 }).unwrap();
        assert_relative_eq!(s, 82.842_712_474_619, max_relative = 1e-12);
        let r2 = species_estimate(&p, 2.0, SpeciesBasis::Level(2), SpeciesRegime::PowerLaw { alpha_hat: 0.5 }).unwrap();
        assert_relative_eq!(r2, 2.0 / 0.5 * (2f64.sqrt() - 1.0) / 0.5 * 7.0, max_relative = 1e-12);
        assert!(matches!(
            species_estimate(&p, 2.0, SpeciesBasis::Level(2), SpeciesRegime::PowerLaw { alpha_hat: 1.0 }),
            Err(UrnError::Singular(_))
        ));
        let slow = species_estimate(&p, E, SpeciesBasis::Level(2), SpeciesRegime::SlowVariation).unwrap();
        assert_relative_eq!(slow, 14.0, max_relative = 1e-12);
        assert!(species_estimate(&p, 1.0, SpeciesBasis::Distinct, SpeciesRegime::SlowVariation).is_err());
    }

    #[test]
    fn covariance_and_normalizer_uniform_two() {
        let m = FrequencyModel::uniform(2).unwrap();
        let a = moment_report(&m, Setting::Poisson { t: 2.0 }, 2, 1e-12).unwrap();
        let b = moment_report(&m, Setting::Poisson { t: 4.0 }, 2, 1e-12).unwrap();
        let c = gt_mm_covariance_poisson(&a, &b).unwrap();
        let shared = 4.0 / (E * E) / 8.0;
        assert_relative_eq!(c.var_g, 2.0 / E / 4.0 - shared, max_relative = 1e-13);
        assert_relative_eq!(c.var_m, 2.0 / E / 4.0 - shared, max_relative = 1e-13);
        assert_relative_eq!(c.cov, -shared, max_relative = 1e-13);
        assert_relative_eq!(clt_normalizer(&a).unwrap(), (-0.5f64).exp(), max_relative = 1e-13);
        assert_relative_eq!(clt_normalizer(&a).unwrap(), 0.6065, max_relative = 1e-4);
        assert!(gt_mm_covariance_poisson(&a, &a).is_err());
    }

    #[test]
    fn covariance_vanishes_for_large_t() {
        let m = FrequencyModel::uniform(2).unwrap();
        let a = moment_report(&m, Setting::Poisson { t: 1e4 }, 2, 1e-12).unwrap();
        let b = moment_report(&m, Setting::Poisson { t: 2e4 }, 2, 1e-12).unwrap();
        let c = gt_mm_covariance_poisson(&a, &b).unwrap();
        assert!(c.var_g.abs() < 1e-100 && c.var_m.abs() < 1e-100 && c.cov.abs() < 1e-100);
    }

    mod props {
        use super::*;
        use proptest::collection::vec;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn estimates_in_range(counts in vec(1u64..20, 1..60), r in 0u64..5) {
                let p = OccupancyProfile::from_observed(counts.iter().enumerate().map(|(j, &x)| (j as u64 + 1, x))).unwrap();
                let g = good_turing(&p, r).unwrap();
                prop_assert!((0.0..=1.0).contains(&g));
                if let Some(a) = alpha_hat(&p, r.max(1)) {
                    prop_assert!(a >= 0.0 && a <= r.max(1) as f64);
                }
                let ci = gt_ci_poisson(&p, p.n() as f64, 0.05).unwrap();
                prop_assert!(ci.lower >= 0.0 && ci.upper <= 1.0 && ci.lower <= ci.upper);
            }
        }
    }
}
