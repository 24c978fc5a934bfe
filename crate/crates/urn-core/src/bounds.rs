//! Sub-Poisson, sub-Gaussian and sub-gamma bounds for occupancy counts, the
//! missing mass and the Good–Turing gap, represented as data.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::freq_models::FrequencyModel;
use crate::moments::{expected_cumulative, expected_occupancy, Certified, MomentReport, Setting, VarianceReport};

pub use crate::special::phi;

/// Default sample size from which the slow-variation variance factor is used.
pub const DEFAULT_N0: u64 = 1000;

/// Tail controlled by a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Upper deviations: radius `√(2vs) + cs`.
    Right,
    /// Lower deviations: radius `√(2vs)`.
    Left,
    /// Absolute deviations: radius `√(2vs) + cs`.
    Both,
}

/// Sub-gamma certificate: `P{deviation > radius(s)} <= multiplier·e^{-s}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubGammaBound {
    pub quantity: String,
    pub side: Side,
    pub v: f64,
    pub c: f64,
    pub multiplier: f64,
    /// Short description of the result the bound instantiates.
    pub anchor: String,
}

impl SubGammaBound {
    pub fn new(quantity: &str, side: Side, v: f64, c: f64, multiplier: f64, anchor: &str) -> Result<Self> {
        if !(v >= 0.0 && c >= 0.0 && multiplier >= 1.0) {
            return Err(UrnError::InvalidParameter(format!("need v >= 0, c >= 0, multiplier >= 1 (got {v}, {c}, {multiplier})")));
        }
        Ok(Self { quantity: quantity.into(), side, v, c, multiplier, anchor: anchor.into() })
    }

    /// Deviation radius at exceedance exponent `s >= 0`.
    pub fn tail_radius(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(UrnError::Domain(format!("exceedance exponent must be non-negative, got {s}")));
        }
        let gaussian = (2.0 * self.v * s).sqrt();
        Ok(match self.side {
            Side::Left => gaussian,
            Side::Right | Side::Both => gaussian + self.c * s,
        })
    }

    /// Radius at confidence level `δ`, i.e. at `s = ln(1/δ)`.
    pub fn radius_for_delta(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(UrnError::Domain(format!("confidence level must lie in (0,1], got {delta}")));
        }
        self.tail_radius(-delta.ln())
    }

    /// `multiplier·e^{-s}`.
    pub fn exceedance_probability(&self, s: f64) -> f64 {
        (self.multiplier * (-s).exp()).min(1.0)
    }

    /// Bound on `log E e^{λ(Z - EZ)}` on the controlled side.
    pub fn log_laplace(&self, lambda: f64) -> Result<f64> {
        let in_side = match self.side {
            Side::Right => lambda >= 0.0,
            Side::Left => lambda <= 0.0,
            Side::Both => true,
        };
        if !in_side {
            return Err(UrnError::Domain(format!("λ = {lambda} is on the uncontrolled side")));
        }
        let c = if self.side == Side::Left { 0.0 } else { self.c };
        let x = c * lambda.abs();
        if x >= 1.0 {
            return Err(UrnError::OutOfRange { lambda, limit: 1.0 / c });
        }
        Ok(self.v * lambda * lambda / (2.0 * (1.0 - x)))
    }
}

/// Concentration certificate for `K_{n,r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnrBound {
    /// `v_{n,r} = 2 min(max(r E K_{n,r}, (r+1) E K_{n,r+1}), E K_{n,r̄})`.
    pub v_nr: f64,
    /// Two-sided bound with radius `√(4 v_{n,r} s) + 2s/3` and multiplier 4.
    pub bound: SubGammaBound,
}

/// Two-sided bound for `K_{n,r}`; `report` must be binomial with `rmax > r`.
pub fn knr_bound(report: &MomentReport, r: u64) -> Result<KnrBound> {
    if !matches!(report.setting, Setting::Binomial { .. }) {
        return Err(UrnError::Setting("the K_{n,r} bound needs binomial moments".into()));
    }
    if r == 0 {
        return Err(UrnError::Domain("occupancy level must be at least 1".into()));
    }
    let rf = r as f64;
    let spread = (rf * report.occupancy(r)?).max((rf + 1.0) * report.occupancy(r + 1)?);
    let v_nr = 2.0 * spread.min(report.cumulative(r)?);
    let bound = SubGammaBound::new(&format!("K_{r}"), Side::Both, 2.0 * v_nr, 2.0 / 3.0, 4.0, "occupancy count concentration")?;
    Ok(KnrBound { v_nr, bound })
}

/// `v_{n,r̄} = min(r E K_{n,r}, E K_{n,r̄})`.
pub fn knrbar_variance_factor(report: &MomentReport, r: u64) -> Result<f64> {
    if r == 0 {
        return Err(UrnError::Domain("occupancy level must be at least 1".into()));
    }
    Ok((r as f64 * report.occupancy(r)?).min(report.cumulative(r)?))
}

/// Sub-Poisson bound `v φ(λ)` on the log-Laplace transform of `K_{n,r̄}`.
pub fn knrbar_log_laplace(v_bar: f64, lambda: f64) -> f64 {
    v_bar * phi(lambda)
}

/// Left (sub-Gaussian) and right (sub-gamma) bounds for `M_{n,0}`.
///
/// The right variance factor switches to `12 a(n)/n²` for de Haan models
/// once `n >= n0`.
pub fn missing_mass_bounds(report: &VarianceReport, n0: u64) -> Result<(SubGammaBound, SubGammaBound)> {
    let nf = report.n as f64;
    let left = SubGammaBound::new("M_0", Side::Left, report.v_minus.value, 0.0, 1.0, "missing mass left tail")?;
    let right = match report.v_slow {
        Some(v) if report.n >= n0 => SubGammaBound::new("M_0", Side::Right, v, 1.0 / nf, 1.0, "missing mass right tail, slow variation")?,
        _ => SubGammaBound::new("M_0", Side::Right, report.v_plus.value, 1.0 / nf, 1.0, "missing mass right tail")?,
    };
    Ok((left, right))
}

const SERIES_TOLERANCE: f64 = 1e-12;
const SERIES_MAX_TERMS: u64 = 200_000;

/// `Σ_{r>=2} (λ/n)^r E K_r(n)` with Poisson occupancy counts, for `0 <= λ < n`.
///
/// The remainder after level `R` is at most `(λ/n)^{R+1} E K_{R+1̄}(n)`.
pub fn missing_mass_log_laplace_series(model: &FrequencyModel, n: u64, lambda: f64, eps: f64) -> Result<Certified> {
    let nf = n as f64;
    if !(lambda >= 0.0) {
        return Err(UrnError::Domain(format!("the series needs λ >= 0, got {lambda}")));
    }
    if lambda >= nf {
        return Err(UrnError::OutOfRange { lambda, limit: nf });
    }
    if lambda == 0.0 {
        return Ok(Certified::ZERO);
    }
    let setting = Setting::Poisson { t: nf };
    let x = lambda / nf;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut power = x;
    for r in 2.. {
        power *= x;
        let k = expected_occupancy(model, setting, r, eps)?;
        value += power * k.value;
        error += power * k.error;
        let remainder = power * x * expected_cumulative(model, setting, r + 1, eps)?.value;
        if remainder <= SERIES_TOLERANCE * value || remainder < 1e-300 || r >= SERIES_MAX_TERMS {
            return Ok(Certified { value, error: error + remainder });
        }
    }
    unreachable!("unbounded level range")
}

/// Right and left bounds for the Good–Turing gap `G_0(t) - M_0(t)`.
///
/// The left tail is sub-gamma with scale `1/t`; it is returned as the right
/// tail of `M_0(t) - G_0(t)`.
pub fn gt_gap_bounds(model: &FrequencyModel, t: f64, eps: f64) -> Result<(SubGammaBound, SubGammaBound)> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(UrnError::Domain(format!("Good–Turing gap bounds need t > 0, got {t}")));
    }
    let setting = Setting::Poisson { t };
    let k1 = expected_occupancy(model, setting, 1, eps)?.value;
    let k2 = expected_occupancy(model, setting, 2, eps)?.value;
    let k = expected_cumulative(model, setting, 1, eps)?.value;
    let t2 = t * t;
    let upper = SubGammaBound::new("G_0-M_0", Side::Right, (k1 + 2.0 * k2) / t2, 1.0 / t, 1.0, "Good–Turing gap right tail")?;
    let lower = SubGammaBound::new("M_0-G_0", Side::Right, 3.0 * k / t2, 1.0 / t, 1.0, "Good–Turing gap left tail")?;
    Ok((upper, lower))
}
