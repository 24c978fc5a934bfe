//! Expected occupancy counts and masses, exact Poisson variances, variance
//! proxies and asymptotic equivalents, each evaluated with a certified
//! truncation error.
//!
//! Infinite sums `Σ_j g(p_j)` are summed directly until `scale·p_j <= 1/2`
//! and the next term is negligible. The remainder is split as
//! `κ·S(J) + Σ_{j>J} h(p_j)` with `κ = g'(0)` and `h(p) = g(p) - κp`; the
//! linear part uses the exact survival function and the nonlinear part is
//! replaced by `∫_{J+1/2}^∞ h(p(x)) dx`, which differs from the sum by at
//! most `|h(p_J)|` because `|h(p(x))|` is monotone there.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::freq_models::{FrequencyModel, ModelKind, SlowlyVarying};
use crate::special::{binomial_tail_ge, c_ls, dbinom, dpois, gamma, poisson_tail_ge, CompensatedSum};

/// Default relative tolerance for certified sums.
pub const DEFAULT_EPSILON: f64 = 1e-9;

const MAX_DIRECT_TERMS: u64 = 50_000_000;

/// Sampling scheme: fixed sample size or Poisson(`t`) sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Setting {
    Binomial { n: u64 },
    Poisson { t: f64 },
}

impl Setting {
    fn scale(&self) -> f64 {
        match *self {
            Setting::Binomial { n } => n as f64,
            Setting::Poisson { t } => t,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Setting::Poisson { t } if !(t >= 0.0 && t.is_finite()) => {
                Err(UrnError::Domain(format!("Poisson intensity must be finite and non-negative, got {t}")))
            }
            _ => Ok(()),
        }
    }
}

/// A value together with a certified bound on its truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certified {
    pub value: f64,
    pub error: f64,
}

impl Certified {
    pub const ZERO: Certified = Certified { value: 0.0, error: 0.0 };

    fn combine(self, other: Certified, a: f64, b: f64) -> Certified {
        Certified {
            value: a * self.value + b * other.value,
            error: a.abs() * self.error + b.abs() * other.error,
        }
    }
}

/// Certified evaluation of `Σ_j g(p_j)` with `g'(0) = kappa`.
fn certified_sum(model: &FrequencyModel, scale: f64, kappa: f64, g: impl Fn(f64) -> f64, eps: f64) -> Certified {
    if let ModelKind::Uniform { k } = model.kind() {
        let value = k as f64 * g(1.0 / k as f64);
        return Certified { value, error: value.abs() * 1e-15 };
    }
    if let Some(support) = model.support() {
        let mut acc = CompensatedSum::new();
        let mut magnitude = 0.0;
        for j in 1..=support {
            let term = g(model.p(j));
            acc.add(term);
            magnitude += term.abs();
        }
        return Certified { value: acc.value(), error: magnitude * 1e-15 };
    }
    let mut acc = CompensatedSum::new();
    let mut magnitude = 0.0;
    let mut j = 1u64;
    let bracket = loop {
        let p = model.p(j);
        let term = g(p);
        acc.add(term);
        magnitude += term.abs();
        if scale * p <= 0.5 {
            let h = (term - kappa * p).abs();
            let total = (acc.value() + kappa * p).abs();
            if h <= eps * total || h < 1e-300 || j >= MAX_DIRECT_TERMS {
                break h;
            }
        }
        j += 1;
    };
    let linear = kappa * model.survival(j);
    let head = acc.value();
    let tol = (eps * (head + linear).abs() * 1e-2).max(1e-300);
    let nonlinear = model
        .integrate_tail(&|p| g(p) - kappa * p, j as f64 + 0.5, tol)
        .expect("infinite models have a continuous extension");
    Certified {
        value: head + linear + nonlinear.value,
        error: bracket + nonlinear.error + 1e-15 * (magnitude + linear.abs()),
    }
}

/// Expected number of symbols seen exactly `r >= 1` times.
pub fn expected_occupancy(model: &FrequencyModel, setting: Setting, r: u64, eps: f64) -> Result<Certified> {
    setting.validate()?;
    if r == 0 {
        return Err(UrnError::Domain("occupancy level must be at least 1".into()));
    }
    let kappa = if r == 1 { setting.scale() } else { 0.0 };
    Ok(match setting {
        Setting::Binomial { n } if r > n => Certified::ZERO,
        Setting::Binomial { n } => certified_sum(model, n as f64, kappa, |p| dbinom(r, n, p), eps),
        Setting::Poisson { t: 0.0 } => Certified::ZERO,
        Setting::Poisson { t } => certified_sum(model, t, kappa, |p| dpois(r, t * p), eps),
    })
}

/// Expected number of symbols seen at least `r >= 1` times.
pub fn expected_cumulative(model: &FrequencyModel, setting: Setting, r: u64, eps: f64) -> Result<Certified> {
    setting.validate()?;
    if r == 0 {
        return Err(UrnError::Domain("cumulative level must be at least 1".into()));
    }
    let kappa = if r == 1 { setting.scale() } else { 0.0 };
    Ok(match setting {
        Setting::Binomial { n } if r > n => Certified::ZERO,
        Setting::Binomial { n } => certified_sum(model, n as f64, kappa, |p| binomial_tail_ge(r, n, p), eps),
        Setting::Poisson { t: 0.0 } => Certified::ZERO,
        Setting::Poisson { t } => certified_sum(model, t, kappa, |p| poisson_tail_ge(r, t * p), eps),
    })
}

/// Expected number of distinct symbols.
pub fn expected_coverage(model: &FrequencyModel, setting: Setting, eps: f64) -> Result<Certified> {
    expected_cumulative(model, setting, 1, eps)
}

/// Expected mass of the symbols seen exactly `r >= 0` times.
pub fn expected_mass(model: &FrequencyModel, setting: Setting, r: u64, eps: f64) -> Result<Certified> {
    setting.validate()?;
    let kappa = if r == 0 { 1.0 } else { 0.0 };
    Ok(match setting {
        Setting::Binomial { n } if r > n => Certified::ZERO,
        Setting::Binomial { n } => certified_sum(model, n as f64, kappa, |p| p * dbinom(r, n, p), eps),
        Setting::Poisson { t } => certified_sum(model, t, kappa, |p| p * dpois(r, t * p), eps),
    })
}

/// `var K(t) = Σ e^{-tp}(1 - e^{-tp}) = E K(2t) - E K(t)`.
pub fn var_coverage_poisson(model: &FrequencyModel, t: f64, eps: f64) -> Result<Certified> {
    Setting::Poisson { t }.validate()?;
    if t == 0.0 {
        return Ok(Certified::ZERO);
    }
    Ok(certified_sum(
        model,
        t,
        t,
        |p| {
            let x = t * p;
            (-x).exp() * -(-x).exp_m1()
        },
        eps,
    ))
}

/// Exact Poisson missing-mass variance, by the occupancy formula and by
/// direct summation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissingMassVariance {
    /// `2 E K_2(t)/t² - E K_2(2t)/(2t²)`.
    pub formula: Certified,
    /// `Σ p² e^{-tp}(1 - e^{-tp})`.
    pub direct: Certified,
}

pub fn var_missing_mass_poisson(model: &FrequencyModel, t: f64, eps: f64) -> Result<MissingMassVariance> {
    Setting::Poisson { t }.validate()?;
    if t == 0.0 {
        return Ok(MissingMassVariance { formula: Certified::ZERO, direct: Certified::ZERO });
    }
    let k2 = expected_occupancy(model, Setting::Poisson { t }, 2, eps)?;
    let k2_double = expected_occupancy(model, Setting::Poisson { t: 2.0 * t }, 2, eps)?;
    let t2 = t * t;
    let formula = k2.combine(k2_double, 2.0 / t2, -0.5 / t2);
    let direct = certified_sum(
        model,
        t,
        0.0,
        |p| {
            let x = t * p;
            p * p * (-x).exp() * -(-x).exp_m1()
        },
        eps,
    );
    Ok(MissingMassVariance { formula, direct })
}

/// `Var^ind(K_n) = E K_{2n} - E K_n = Σ (1-p)^n (1 - (1-p)^n)`.
pub fn var_ind(model: &FrequencyModel, n: u64, eps: f64) -> Certified {
    if n == 0 {
        return Certified::ZERO;
    }
    let nf = n as f64;
    certified_sum(
        model,
        nf,
        nf,
        |p| {
            let log_y = nf * (-p).ln_1p();
            log_y.exp() * -log_y.exp_m1()
        },
        eps,
    )
}

/// `w_n = Σ p² / (2 c_LS((1-p)^n))`.
pub fn log_sobolev_proxy(model: &FrequencyModel, n: u64, eps: f64) -> Certified {
    if n == 0 {
        return Certified::ZERO;
    }
    let nf = n as f64;
    certified_sum(
        model,
        nf,
        0.0,
        |p| {
            let log_y = nf * (-p).ln_1p();
            let y = log_y.exp();
            let one_minus_y = -log_y.exp_m1();
            if y == 0.0 || one_minus_y == 0.0 {
                0.0
            } else {
                p * p / (2.0 * c_ls(y, one_minus_y))
            }
        },
        eps,
    )
}

/// Exact binomial variances of `K_n` and `M_{n,0}` for finite supports,
/// from pairwise joint absence probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialVariances {
    pub var_k: f64,
    pub var_m0: f64,
}

pub fn binomial_variances_finite(model: &FrequencyModel, n: u64) -> Result<BinomialVariances> {
    let support = model
        .support()
        .ok_or_else(|| UrnError::Domain("exact binomial variances need a finite support".into()))?;
    let nf = n as f64;
    let p: Vec<f64> = (1..=support).map(|j| model.p(j)).collect();
    let absent: Vec<f64> = p.iter().map(|pi| (nf * (-pi).ln_1p()).exp()).collect();
    let mut var_k = CompensatedSum::new();
    let mut var_m = CompensatedSum::new();
    for i in 0..p.len() {
        let single = absent[i] * (1.0 - absent[i]);
        var_k.add(single);
        var_m.add(p[i] * p[i] * single);
        for j in 0..p.len() {
            if i != j {
                let both = (1.0 - p[i] - p[j]).max(0.0).powf(nf);
                let cov = both - absent[i] * absent[j];
                var_k.add(cov);
                var_m.add(p[i] * p[j] * cov);
            }
        }
    }
    Ok(BinomialVariances { var_k: var_k.value(), var_m0: var_m.value() })
}

/// One serialized row: quantity name, level, value and error bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub quantity: String,
    pub r: Option<u64>,
    pub value: f64,
    pub error_bound: f64,
}

impl ReportRow {
    fn new(quantity: &str, r: Option<u64>, c: Certified) -> Self {
        Self { quantity: quantity.to_string(), r, value: c.value, error_bound: c.error }
    }
}

/// Expected occupancy counts and masses up to level `rmax`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub setting: Setting,
    pub rmax: u64,
    pub ek: Certified,
    /// `E K_r` for `r = 1..=rmax`.
    pub ek_r: Vec<Certified>,
    /// `E K_{r̄}` for `r = 1..=rmax+1`.
    pub ekbar_r: Vec<Certified>,
    /// `E M_r` for `r = 0..=rmax`.
    pub em_r: Vec<Certified>,
    pub truncation_error: f64,
}

impl MomentReport {
    /// `E K_r`, zero above `rmax + 1` is not assumed: levels outside the
    /// report are an error.
    pub fn occupancy(&self, r: u64) -> Result<f64> {
        self.ek_r
            .get((r as usize).wrapping_sub(1))
            .map(|c| c.value)
            .ok_or_else(|| UrnError::Domain(format!("level {r} not in report (rmax = {})", self.rmax)))
    }

    pub fn cumulative(&self, r: u64) -> Result<f64> {
        self.ekbar_r
            .get((r as usize).wrapping_sub(1))
            .map(|c| c.value)
            .ok_or_else(|| UrnError::Domain(format!("level {r} not in report (rmax = {})", self.rmax)))
    }

    pub fn mass(&self, r: u64) -> Result<f64> {
        self.em_r
            .get(r as usize)
            .map(|c| c.value)
            .ok_or_else(|| UrnError::Domain(format!("level {r} not in report (rmax = {})", self.rmax)))
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = vec![ReportRow::new("EK", None, self.ek)];
        rows.extend(self.ek_r.iter().zip(1..).map(|(c, r)| ReportRow::new("EK_r", Some(r), *c)));
        rows.extend(self.ekbar_r.iter().zip(1..).map(|(c, r)| ReportRow::new("EKbar_r", Some(r), *c)));
        rows.extend(self.em_r.iter().zip(0..).map(|(c, r)| ReportRow::new("EM_r", Some(r), *c)));
        rows
    }
}

pub fn moment_report(model: &FrequencyModel, setting: Setting, rmax: u64, eps: f64) -> Result<MomentReport> {
    let ek_r = (1..=rmax)
        .map(|r| expected_occupancy(model, setting, r, eps))
        .collect::<Result<Vec<_>>>()?;
    let ekbar_r = (1..=rmax + 1)
        .map(|r| expected_cumulative(model, setting, r, eps))
        .collect::<Result<Vec<_>>>()?;
    let em_r = (0..=rmax)
        .map(|r| expected_mass(model, setting, r, eps))
        .collect::<Result<Vec<_>>>()?;
    let ek = ekbar_r[0];
    let truncation_error = ek_r
        .iter()
        .chain(&ekbar_r)
        .chain(&em_r)
        .map(|c| c.error / c.value.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(MomentReport { setting, rmax, ek, ek_r, ekbar_r, em_r, truncation_error })
}

/// Splits `Σ_r r E K_r = n` (or `t`) into the levels `r <= rmax` and the
/// certified remainder `Σ_{r>rmax} r E K_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyIdentity {
    pub partial: Certified,
    pub remainder: Certified,
}

pub fn occupancy_identity(model: &FrequencyModel, setting: Setting, rmax: u64, eps: f64) -> Result<OccupancyIdentity> {
    let mut partial = Certified::ZERO;
    for r in 1..=rmax {
        let c = expected_occupancy(model, setting, r, eps)?;
        partial = partial.combine(c, 1.0, r as f64);
    }
    let scale = setting.scale();
    let remainder = match setting {
        Setting::Binomial { n: 0 } => Certified::ZERO,
        Setting::Binomial { n } => certified_sum(model, scale, 0.0, |p| scale * p * binomial_tail_ge(rmax, n - 1, p), eps),
        Setting::Poisson { t } => certified_sum(model, scale, 0.0, |p| t * p * poisson_tail_ge(rmax, t * p), eps),
    };
    Ok(OccupancyIdentity { partial, remainder })
}

/// Exact Poisson variances and variance proxies at sample size `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub n: u64,
    /// `var K(n)` in the Poisson setting.
    pub var_k: Certified,
    /// `var M_0(n)` in the Poisson setting.
    pub var_m0: Certified,
    /// `2 E K_2(n)/n²`.
    pub v_minus: Certified,
    /// `2 E K_{2̄}(n)/n²`.
    pub v_plus: Certified,
    /// `12 a(n)/n²` for de Haan models.
    pub v_slow: Option<f64>,
    /// Logarithmic Sobolev proxy `w_n`.
    pub w_n: Certified,
    /// `E K_{2n} - E K_n`.
    pub var_ind: Certified,
    /// `r E K_{n,r}` for `r = 1, 2, 3`.
    pub efron_stein: Vec<Certified>,
}

impl VarianceReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = vec![
            ReportRow::new("var_K", None, self.var_k),
            ReportRow::new("var_M0", None, self.var_m0),
            ReportRow::new("v_minus", None, self.v_minus),
            ReportRow::new("v_plus", None, self.v_plus),
            ReportRow::new("w_n", None, self.w_n),
            ReportRow::new("var_ind", None, self.var_ind),
        ];
        if let Some(v) = self.v_slow {
            rows.push(ReportRow::new("v_slow", None, Certified { value: v, error: 0.0 }));
        }
        rows.extend(self.efron_stein.iter().zip(1..).map(|(c, r)| ReportRow::new("efron_stein", Some(r), *c)));
        rows
    }
}

pub fn variance_proxies(model: &FrequencyModel, n: u64, eps: f64) -> Result<VarianceReport> {
    if n == 0 {
        return Err(UrnError::Domain("variance proxies need n >= 1".into()));
    }
    let nf = n as f64;
    let poisson = Setting::Poisson { t: nf };
    let binomial = Setting::Binomial { n };
    let n2 = nf * nf;
    let k2 = expected_occupancy(model, poisson, 2, eps)?;
    let kbar2 = expected_cumulative(model, poisson, 2, eps)?;
    let efron_stein = (1..=3u64)
        .map(|r| expected_occupancy(model, binomial, r, eps).map(|c| Certified::ZERO.combine(c, 0.0, r as f64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(VarianceReport {
        n,
        var_k: var_coverage_poisson(model, nf, eps)?,
        var_m0: var_missing_mass_poisson(model, nf, eps)?.direct,
        v_minus: Certified::ZERO.combine(k2, 0.0, 2.0 / n2),
        v_plus: Certified::ZERO.combine(kbar2, 0.0, 2.0 / n2),
        v_slow: if model.is_de_haan() { model.auxiliary_a(nf).map(|a| 12.0 * a / n2) } else { None },
        w_n: log_sobolev_proxy(model, n, eps),
        var_ind: var_ind(model, n, eps),
        efron_stein,
    })
}

/// Interval diagnostics comparing Poisson, independent and binomial
/// variances of the number of distinct symbols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonizationGap {
    pub var_poisson: f64,
    pub var_ind: f64,
    /// `var K(n) - Var^ind(K_n)`.
    pub poisson_minus_ind: f64,
    /// `E K_2(2n)/n`.
    pub poisson_minus_ind_lower: f64,
    /// `2 E K_2(n)/n`.
    pub poisson_minus_ind_upper: f64,
    /// `(E K_{n,1})²/n - E K_{2n,2}/(2n-1)`, an upper bound on
    /// `Var^ind(K_n) - var(K_n)`.
    pub ind_minus_binomial_upper: f64,
    /// Interval implied for the binomial `var(K_n)`.
    pub var_binomial_interval: (f64, f64),
}

pub fn poissonization_gap(model: &FrequencyModel, n: u64, eps: f64) -> Result<PoissonizationGap> {
    if n == 0 {
        return Err(UrnError::Domain("Poissonization diagnostics need n >= 1".into()));
    }
    let nf = n as f64;
    let var_poisson = var_coverage_poisson(model, nf, eps)?.value;
    let vi = var_ind(model, n, eps).value;
    let k2_double = expected_occupancy(model, Setting::Poisson { t: 2.0 * nf }, 2, eps)?.value;
    let k2 = expected_occupancy(model, Setting::Poisson { t: nf }, 2, eps)?.value;
    let kn1 = expected_occupancy(model, Setting::Binomial { n }, 1, eps)?.value;
    let k2n2 = expected_occupancy(model, Setting::Binomial { n: 2 * n }, 2, eps)?.value;
    let upper = kn1 * kn1 / nf - k2n2 / (2.0 * nf - 1.0);
    Ok(PoissonizationGap {
        var_poisson,
        var_ind: vi,
        poisson_minus_ind: var_poisson - vi,
        poisson_minus_ind_lower: k2_double / nf,
        poisson_minus_ind_upper: 2.0 * k2 / nf,
        ind_minus_binomial_upper: upper,
        var_binomial_interval: (vi - upper, vi),
    })
}

/// Asymptotic regime of a regularly varying model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    RegularVariation,
    FastVariation,
    SlowVariation,
}

/// Asymptotic equivalents of occupancy moments at sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KarlinPrediction {
    pub regime: Regime,
    pub alpha: f64,
    pub n: u64,
    pub r: u64,
    pub ek: f64,
    pub ek_r: f64,
    pub ekbar_r: f64,
    pub em_r: f64,
    pub var_m0: f64,
}

fn factorial(r: u64) -> f64 {
    (1..=r).map(|k| k as f64).product()
}

pub fn karlin_asymptotics(model: &FrequencyModel, n: u64, r: u64) -> Result<KarlinPrediction> {
    let meta = model.rv_meta().ok_or(UrnError::NoRvMeta)?;
    let alpha = meta.alpha;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(UrnError::Domain(format!("regular-variation index must lie in [0,1], got {alpha}")));
    }
    if r == 0 || n == 0 {
        return Err(UrnError::Domain("asymptotic equivalents need n >= 1 and r >= 1".into()));
    }
    let nf = n as f64;
    let rf = r as f64;
    if alpha == 0.0 {
        if meta.slowly_varying != SlowlyVarying::DeHaan {
            return Err(UrnError::NoAsymptotics);
        }
        let a = model.auxiliary_a(nf).ok_or(UrnError::NoAsymptotics)?;
        let ell = model.ell(nf)?;
        return Ok(KarlinPrediction {
            regime: Regime::SlowVariation,
            alpha,
            n,
            r,
            ek: ell,
            ek_r: a / rf,
            ekbar_r: ell,
            em_r: a / nf,
            var_m0: 3.0 * a / (4.0 * nf * nf),
        });
    }
    let ell = model.ell(nf)?;
    if alpha == 1.0 {
        let ell1 = model.ell1(nf)?;
        let (ek_r, ekbar_r) = if r == 1 {
            (nf * ell1, nf * ell1)
        } else {
            (nf * ell / (rf * (rf - 1.0)), nf * ell / (rf - 1.0))
        };
        return Ok(KarlinPrediction {
            regime: Regime::FastVariation,
            alpha,
            n,
            r,
            ek: nf * ell1,
            ek_r,
            ekbar_r,
            em_r: if r == 0 { ell1 } else { ell / rf },
            var_m0: ell / (2.0 * nf),
        });
    }
    let scale = nf.powf(alpha) * ell;
    let ek = gamma(1.0 - alpha) * scale;
    Ok(KarlinPrediction {
        regime: Regime::RegularVariation,
        alpha,
        n,
        r,
        ek,
        ek_r: alpha * gamma(rf - alpha) / factorial(r) * scale,
        ekbar_r: if r == 1 { ek } else { gamma(rf - alpha) / factorial(r - 1) * scale },
        em_r: alpha * gamma(rf + 1.0 - alpha) / factorial(r) * scale / nf,
        var_m0: alpha * gamma(2.0 - alpha) * (1.0 - 2f64.powf(alpha - 2.0)) * nf.powf(alpha - 2.0) * ell,
    })
}

/// `√v_n⁺ / E M_{n,0}`, or `None` when the expected missing mass vanishes.
pub fn relative_fluctuation(model: &FrequencyModel, n: u64, eps: f64) -> Result<Option<f64>> {
    let em0 = expected_mass(model, Setting::Binomial { n }, 0, eps)?.value;
    if em0 <= 0.0 {
        return Ok(None);
    }
    let nf = n as f64;
    let kbar2 = expected_cumulative(model, Setting::Poisson { t: nf }, 2, eps)?.value;
    Ok(Some((2.0 * kbar2).sqrt() / nf / em0))
}
