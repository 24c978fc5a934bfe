//! Frequency models: non-increasing probability sequences over the positive
//! integers with exact survival functions, certified tail bounds and
//! regular-variation metadata.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::quadrature;
use crate::special::{expint_e2, hurwitz_zeta_int, CompensatedSum};

/// Largest symbol index addressed individually.
pub const INDEX_CAP: u64 = 1 << 62;

const HEAD_LEN: u64 = 1 << 16;
const SQRTGEOM_MAX_Q: f64 = 0.95;

/// Model family and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelKind {
    Uniform { k: u64 },
    Zipf { s: f64 },
    Geometric { q: f64 },
    StretchedGeometric { q: f64 },
    FastVariation,
    PoissonPmf { lambda: f64 },
    Explicit { support: u64 },
}

/// Slowly varying part of the counting function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlowlyVarying {
    /// `ℓ` is asymptotically constant.
    Constant(f64),
    /// `ℓ(x) = ν̄(1/x)/x`, evaluated from the counting function.
    CountingFunction,
    /// de Haan class with auxiliary function `a(x) → ∞`.
    DeHaan,
    /// Counting function grows logarithmically with bounded auxiliary function.
    Logarithmic,
}

/// Regular-variation metadata: `ν̄(1/x) ~ x^α ℓ(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RvMeta {
    pub alpha: f64,
    pub slowly_varying: SlowlyVarying,
}

#[derive(Debug)]
struct Tables {
    norm: f64,
    p: Vec<f64>,
    surv: Vec<f64>,
}

impl Tables {
    fn empty(norm: f64) -> Self {
        Self { norm, p: Vec::new(), surv: Vec::new() }
    }

    /// Builds `p` and the survival table `surv[j] = Σ_{k>j} p_k` from
    /// unnormalized weights and the unnormalized mass beyond the last weight.
    fn from_weights(weights: Vec<f64>, tail: f64) -> Self {
        let mut acc = CompensatedSum::new();
        acc.add(tail);
        let mut raw_surv = vec![0.0; weights.len() + 1];
        raw_surv[weights.len()] = tail;
        for (j, w) in weights.iter().enumerate().rev() {
            acc.add(*w);
            raw_surv[j] = acc.value();
        }
        let norm = raw_surv[0];
        let p = weights.iter().map(|w| w / norm).collect();
        let surv = raw_surv.iter().map(|s| s / norm).collect();
        Self { norm, p, surv }
    }
}

/// A probability sequence `(p_j)_{j≥1}`, non-increasing in `j`.
///
/// Cloning is cheap; precomputed tables are shared.
#[derive(Debug, Clone)]
pub struct FrequencyModel {
    kind: ModelKind,
    tables: Arc<Tables>,
}

fn fastvar_weight(x: f64) -> f64 {
    let l = x.ln_1p();
    1.0 / (x * l * l)
}

fn fastvar_weight_derivative(x: f64) -> f64 {
    let l = x.ln_1p();
    -1.0 / (x * x * l * l) - 2.0 / (x * (x + 1.0) * l * l * l)
}

/// `∫_a^∞ dx / (x ln²(1+x))` for `a >= 1`.
fn fastvar_integral(a: f64) -> f64 {
    let ell = a.ln_1p();
    let mut sum = 1.0;
    for k in 1..400 {
        let term = expint_e2(k as f64 * ell);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum / ell
}

/// `Σ_{k>=a} 1/(k ln²(1+k))` by Euler–Maclaurin, for `a >= HEAD_LEN`.
fn fastvar_tail(a: f64) -> f64 {
    fastvar_integral(a) + 0.5 * fastvar_weight(a) - fastvar_weight_derivative(a) / 12.0
}

/// `∫_a^∞ q^{√x} dx` with `L = -ln q`.
fn sqrtgeom_integral(ell: f64, a: f64) -> f64 {
    let r = a.sqrt();
    2.0 / (ell * ell) * (1.0 + ell * r) * (-ell * r).exp()
}

impl FrequencyModel {
    /// Uniform distribution over `k` symbols.
    pub fn uniform(k: u64) -> Result<Self> {
        if k == 0 {
            return Err(UrnError::InvalidParameter("uniform support size k must be at least 1".into()));
        }
        Ok(Self { kind: ModelKind::Uniform { k }, tables: Arc::new(Tables::empty(k as f64)) })
    }

    /// Zipf law `p_j = j^{-s}/ζ(s)`.
    pub fn zipf(s: f64) -> Result<Self> {
        if !(s > 1.0 && s.is_finite()) {
            return Err(UrnError::InvalidParameter(format!("zipf exponent must exceed 1, got {s}")));
        }
        let weights: Vec<f64> = (1..=HEAD_LEN).map(|j| (j as f64).powf(-s)).collect();
        let tail = hurwitz_zeta_int(s, HEAD_LEN + 1);
        let tables = Tables::from_weights(weights, tail);
        Ok(Self { kind: ModelKind::Zipf { s }, tables: Arc::new(tables) })
    }

    /// Geometric law `p_j = (1-q)^{j-1} q`.
    pub fn geometric(q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(UrnError::InvalidParameter(format!("geometric q must lie in (0,1), got {q}")));
        }
        Ok(Self { kind: ModelKind::Geometric { q }, tables: Arc::new(Tables::empty(1.0)) })
    }

    /// Stretched-geometric law `p_j = c q^{√j}`.
    pub fn stretched_geometric(q: f64) -> Result<Self> {
        if !(q > 0.0 && q <= SQRTGEOM_MAX_Q) {
            return Err(UrnError::InvalidParameter(format!(
                "stretched-geometric q must lie in (0,{SQRTGEOM_MAX_Q}], got {q}"
            )));
        }
        let ell = -q.ln();
        let mut weights = Vec::new();
        let mut running = 0.0;
        let mut j = 1u64;
        loop {
            let w = (-ell * (j as f64).sqrt()).exp();
            weights.push(w);
            running += w;
            if sqrtgeom_integral(ell, j as f64) <= 1e-20 * running {
                break;
            }
            j += 1;
        }
        let tail = sqrtgeom_integral(ell, j as f64 + 0.5);
        let tables = Tables::from_weights(weights, tail);
        Ok(Self { kind: ModelKind::StretchedGeometric { q }, tables: Arc::new(tables) })
    }

    /// Fast-variation law `p_j ∝ 1/(j ln²(j+1))`.
    pub fn fast_variation() -> Self {
        let weights: Vec<f64> = (1..=HEAD_LEN).map(|j| fastvar_weight(j as f64)).collect();
        let tail = fastvar_tail((HEAD_LEN + 1) as f64);
        let tables = Tables::from_weights(weights, tail);
        Self { kind: ModelKind::FastVariation, tables: Arc::new(tables) }
    }

    /// Poisson probability mass function `p_k = e^{-λ} λ^{k-1}/(k-1)!`,
    /// non-increasing for `λ <= 1`. Entries that underflow are dropped.
    pub fn poisson_pmf(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(UrnError::InvalidParameter(format!(
                "poisson pmf rate must lie in (0,1] to keep frequencies non-increasing, got {lambda}"
            )));
        }
        let mut weights = Vec::new();
        let mut w = (-lambda).exp();
        let mut k = 0u64;
        while w > 0.0 {
            weights.push(w);
            k += 1;
            w *= lambda / k as f64;
        }
        let tables = Tables::from_weights(weights, 0.0);
        Ok(Self { kind: ModelKind::PoissonPmf { lambda }, tables: Arc::new(tables) })
    }

    /// Explicit list of probabilities; zeros are dropped, the rest sorted
    /// non-increasing and normalized.
    pub fn explicit(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(UrnError::InvalidParameter("explicit probabilities must be finite and non-negative".into()));
        }
        let mut weights: Vec<f64> = probabilities.into_iter().filter(|p| *p > 0.0).collect();
        if weights.is_empty() {
            return Err(UrnError::InvalidParameter("explicit model needs a positive probability".into()));
        }
        weights.sort_by(|a, b| b.total_cmp(a));
        let support = weights.len() as u64;
        let tables = Tables::from_weights(weights, 0.0);
        Ok(Self { kind: ModelKind::Explicit { support }, tables: Arc::new(tables) })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Number of symbols with positive probability, `None` when infinite.
    pub fn support(&self) -> Option<u64> {
        match self.kind {
            ModelKind::Uniform { k } => Some(k),
            ModelKind::Explicit { support } => Some(support),
            ModelKind::PoissonPmf { .. } => Some(self.tables.p.len() as u64),
            _ => None,
        }
    }

    /// `p_j` for `j >= 1`.
    pub fn prob(&self, j: u64) -> Result<f64> {
        if j == 0 {
            return Err(UrnError::Domain("symbol indices start at 1".into()));
        }
        Ok(self.p(j))
    }

    pub(crate) fn p(&self, j: u64) -> f64 {
        let t = &self.tables;
        match self.kind {
            ModelKind::Uniform { k } => {
                if j <= k {
                    1.0 / k as f64
                } else {
                    0.0
                }
            }
            ModelKind::Zipf { s } => {
                if j <= t.p.len() as u64 {
                    t.p[(j - 1) as usize]
                } else {
                    (j as f64).powf(-s) / t.norm
                }
            }
            ModelKind::Geometric { q } => q * ((j - 1) as f64 * (-q).ln_1p()).exp(),
            ModelKind::StretchedGeometric { q } => (q.ln() * (j as f64).sqrt()).exp() / t.norm,
            ModelKind::FastVariation => {
                if j <= t.p.len() as u64 {
                    t.p[(j - 1) as usize]
                } else {
                    fastvar_weight(j as f64) / t.norm
                }
            }
            ModelKind::PoissonPmf { .. } | ModelKind::Explicit { .. } => t.p.get((j - 1) as usize).copied().unwrap_or(0.0),
        }
    }

    /// Continuous non-increasing interpolation of `p_j` for infinite models.
    pub fn density(&self, x: f64) -> Option<f64> {
        let t = &self.tables;
        match self.kind {
            ModelKind::Zipf { s } => Some(x.powf(-s) / t.norm),
            ModelKind::Geometric { q } => Some(q * ((x - 1.0) * (-q).ln_1p()).exp()),
            ModelKind::StretchedGeometric { q } => Some((q.ln() * x.sqrt()).exp() / t.norm),
            ModelKind::FastVariation => Some(fastvar_weight(x) / t.norm),
            _ => None,
        }
    }

    /// Survival function `S(j) = Σ_{k>j} p_k`, evaluated to full precision.
    pub fn survival(&self, j: u64) -> f64 {
        let t = &self.tables;
        let tabled = (j as usize) < t.surv.len();
        match self.kind {
            ModelKind::Uniform { k } => {
                if j < k {
                    (k - j) as f64 / k as f64
                } else {
                    0.0
                }
            }
            ModelKind::Geometric { q } => (j as f64 * (-q).ln_1p()).exp(),
            _ if tabled => t.surv[j as usize],
            ModelKind::Zipf { s } => hurwitz_zeta_int(s, j + 1) / t.norm,
            ModelKind::FastVariation => fastvar_tail(j as f64 + 1.0) / t.norm,
            ModelKind::StretchedGeometric { q } => sqrtgeom_integral(-q.ln(), j as f64 + 0.5) / t.norm,
            ModelKind::PoissonPmf { .. } | ModelKind::Explicit { .. } => 0.0,
        }
    }

    /// Certified upper bound on `Σ_{k>J} p_k`.
    pub fn tail_mass(&self, j: u64) -> f64 {
        if j == 0 {
            return 1.0;
        }
        let t = &self.tables;
        let bound = match self.kind {
            ModelKind::Zipf { s } => (j as f64).powf(1.0 - s) / ((s - 1.0) * t.norm),
            ModelKind::StretchedGeometric { q } => sqrtgeom_integral(-q.ln(), j as f64) / t.norm,
            ModelKind::FastVariation => fastvar_integral(j as f64) / t.norm * (1.0 + 1e-12),
            _ => self.survival(j),
        };
        bound.min(1.0)
    }

    /// Counting function `ν̄(x) = |{j : p_j >= x}|`.
    pub fn counting_function(&self, x: f64) -> Result<u64> {
        if !(x > 0.0) {
            return Err(UrnError::Domain(format!("counting function needs a positive threshold, got {x}")));
        }
        if self.p(1) < x {
            return Ok(0);
        }
        let guess = match self.kind {
            ModelKind::Uniform { k } => return Ok(k),
            ModelKind::Geometric { q } => {
                let raw = 1.0 + ((x / q).ln() / (-q).ln_1p()).floor();
                if raw >= INDEX_CAP as f64 {
                    return Err(UrnError::IndexOverflow);
                }
                Some(raw.max(1.0) as u64)
            }
            ModelKind::Zipf { s } => {
                let raw = (x * self.tables.norm).powf(-1.0 / s).floor();
                if raw >= INDEX_CAP as f64 {
                    return Err(UrnError::IndexOverflow);
                }
                Some(raw.max(1.0) as u64)
            }
            _ => None,
        };
        if let Some(mut j) = guess {
            while j > 1 && self.p(j) < x {
                j -= 1;
            }
            while self.p(j + 1) >= x {
                j += 1;
            }
            return Ok(j);
        }
        if let Some(n) = self.support() {
            let (mut lo, mut hi) = (1u64, n);
            while lo < hi {
                let mid = lo + (hi - lo).div_ceil(2);
                if self.p(mid) >= x {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            return Ok(lo);
        }
        let mut lo = 1u64;
        let mut hi = 2u64;
        while self.p(hi) >= x {
            lo = hi;
            hi = hi.checked_mul(2).filter(|h| *h <= INDEX_CAP).ok_or(UrnError::IndexOverflow)?;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.p(mid) >= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Smallest `J` with `tail_mass(J) <= epsilon`.
    pub fn truncation_index(&self, epsilon: f64) -> Result<u64> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(UrnError::Domain(format!("tolerance must lie in (0,1), got {epsilon}")));
        }
        if let Some(n) = self.support() {
            if self.tail_mass(n) <= epsilon {
                let (mut lo, mut hi) = (0u64, n);
                while lo < hi {
                    let mid = lo + (hi - lo) / 2;
                    if self.tail_mass(mid) <= epsilon {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                return Ok(lo);
            }
        }
        let mut lo = 0u64;
        let mut hi = 1u64;
        while self.tail_mass(hi) > epsilon {
            lo = hi;
            hi = hi.checked_mul(2).filter(|h| *h <= INDEX_CAP).ok_or(UrnError::IndexOverflow)?;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.tail_mass(mid) <= epsilon {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Regular-variation metadata, when the family has it.
    pub fn rv_meta(&self) -> Option<RvMeta> {
        match self.kind {
            ModelKind::Zipf { s } => Some(RvMeta {
                alpha: 1.0 / s,
                slowly_varying: SlowlyVarying::Constant(self.tables.norm.powf(-1.0 / s)),
            }),
            ModelKind::FastVariation => Some(RvMeta { alpha: 1.0, slowly_varying: SlowlyVarying::CountingFunction }),
            ModelKind::StretchedGeometric { .. } => Some(RvMeta { alpha: 0.0, slowly_varying: SlowlyVarying::DeHaan }),
            ModelKind::Geometric { .. } => Some(RvMeta { alpha: 0.0, slowly_varying: SlowlyVarying::Logarithmic }),
            _ => None,
        }
    }

    /// Whether the counting function belongs to the de Haan class with an
    /// auxiliary function tending to infinity.
    pub fn is_de_haan(&self) -> bool {
        matches!(self.kind, ModelKind::StretchedGeometric { .. })
    }

    /// Slowly varying part `ℓ(x)` of `ν̄(1/x) = x^α ℓ(x)`.
    pub fn ell(&self, x: f64) -> Result<f64> {
        let meta = self.rv_meta().ok_or(UrnError::NoRvMeta)?;
        match (self.kind, meta.slowly_varying) {
            (_, SlowlyVarying::Constant(c)) => Ok(c),
            (ModelKind::StretchedGeometric { q }, _) => {
                let v = (x / self.tables.norm).ln().max(0.0) / -q.ln();
                Ok(v * v)
            }
            _ => Ok(self.counting_function(1.0 / x)? as f64 / x.powf(meta.alpha)),
        }
    }

    /// `ℓ₁(x) = ∫_x^∞ ℓ(u)/u du` for the fast-variation model, equal to
    /// `ℓ(x) + S(ν̄(1/x))` when `ℓ(u) = ν̄(1/u)/u`.
    pub fn ell1(&self, x: f64) -> Result<f64> {
        match self.kind {
            ModelKind::FastVariation => {
                let nu = self.counting_function(1.0 / x)?;
                Ok(nu as f64 / x + self.survival(nu))
            }
            _ => Err(UrnError::NoAsymptotics),
        }
    }

    /// Auxiliary function `a(x)` of the de Haan class.
    pub fn auxiliary_a(&self, x: f64) -> Option<f64> {
        match self.kind {
            ModelKind::StretchedGeometric { q } => {
                let ell = -q.ln();
                Some(2.0 * (x / self.tables.norm).ln().max(0.0) / (ell * ell))
            }
            ModelKind::Geometric { q } => Some(-1.0 / (-q).ln_1p()),
            _ => None,
        }
    }

    /// Normalizing constant of the unnormalized weights (`ζ(s)` for zipf).
    pub fn normalizer(&self) -> f64 {
        self.tables.norm
    }

    /// Integrates `g(p(x))` over `x ∈ [a, ∞)` for infinite models.
    pub(crate) fn integrate_tail(&self, g: &impl Fn(f64) -> f64, a: f64, tol: f64) -> Option<quadrature::Estimate> {
        self.density(a)?;
        Some(quadrature::integrate_to_infinity(&|x| g(self.density(x).unwrap_or(0.0)), a, tol))
    }
}

impl fmt::Display for FrequencyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ModelKind::Uniform { k } => write!(f, "uniform:k={k}"),
            ModelKind::Zipf { s } => write!(f, "zipf:s={s}"),
            ModelKind::Geometric { q } => write!(f, "geom:q={q}"),
            ModelKind::StretchedGeometric { q } => write!(f, "sqrtgeom:q={q}"),
            ModelKind::FastVariation => write!(f, "fastvar"),
            ModelKind::PoissonPmf { lambda } => write!(f, "poisson:lambda={lambda}"),
            ModelKind::Explicit { support } => write!(f, "explicit:<{support} probabilities>"),
        }
    }
}

fn parse_param(spec: &str, body: &str, key: &str) -> Result<f64> {
    let malformed = |reason: String| UrnError::MalformedSpec { spec: spec.to_string(), reason };
    let (k, v) = body
        .split_once('=')
        .ok_or_else(|| malformed(format!("expected `{key}=<value>`")))?;
    if k.trim() != key {
        return Err(malformed(format!("expected parameter `{key}`, found `{}`", k.trim())));
    }
    v.trim()
        .parse::<f64>()
        .map_err(|_| malformed(format!("`{}` is not a number", v.trim())))
}

/// Parses one probability per line; blank lines and `#` comments are skipped.
pub fn parse_probability_list(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .flat_map(|l| l.split(','))
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| UrnError::InvalidParameter(format!("`{l}` is not a probability")))
        })
        .collect()
}

impl FromStr for FrequencyModel {
    type Err = UrnError;

    /// Parses `uniform:k=100`, `zipf:s=2`, `geom:q=0.5`, `sqrtgeom:q=0.5`,
    /// `fastvar`, `poisson:lambda=1`, `explicit:@file.csv` or
    /// `explicit:0.5,0.3,0.2`.
    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (family, body) = spec.split_once(':').unwrap_or((spec, ""));
        match family {
            "uniform" => {
                let k = parse_param(spec, body, "k")?;
                if k.fract() != 0.0 || k < 1.0 {
                    return Err(UrnError::MalformedSpec { spec: spec.into(), reason: "k must be a positive integer".into() });
                }
                Self::uniform(k as u64)
            }
            "zipf" => Self::zipf(parse_param(spec, body, "s")?),
            "geom" => Self::geometric(parse_param(spec, body, "q")?),
            "sqrtgeom" => Self::stretched_geometric(parse_param(spec, body, "q")?),
            "poisson" => Self::poisson_pmf(parse_param(spec, body, "lambda")?),
            "fastvar" => {
                if !body.is_empty() {
                    return Err(UrnError::MalformedSpec { spec: spec.into(), reason: "fastvar takes no parameters".into() });
                }
                Ok(Self::fast_variation())
            }
            "explicit" => {
                let list = match body.strip_prefix('@') {
                    Some(path) => parse_probability_list(&std::fs::read_to_string(path)?)?,
                    None => parse_probability_list(body)?,
                };
                Self::explicit(list)
            }
            other => Err(UrnError::UnknownFamily(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn all_models() -> Vec<FrequencyModel> {
        vec![
            FrequencyModel::uniform(7).unwrap(),
            FrequencyModel::zipf(2.0).unwrap(),
            FrequencyModel::zipf(1.3).unwrap(),
            FrequencyModel::geometric(0.3).unwrap(),
            FrequencyModel::stretched_geometric(0.5).unwrap(),
            FrequencyModel::fast_variation(),
            FrequencyModel::poisson_pmf(1.0).unwrap(),
            FrequencyModel::explicit(vec![0.1, 0.5, 0.0, 0.4]).unwrap(),
        ]
    }

    #[test]
    fn prob_examples() {
        assert_eq!(FrequencyModel::geometric(0.5).unwrap().prob(3).unwrap(), 0.125);
        assert_relative_eq!(FrequencyModel::zipf(2.0).unwrap().prob(1).unwrap(), 6.0 / (PI * PI), max_relative = 1e-14);
        assert_eq!(FrequencyModel::uniform(4).unwrap().prob(5).unwrap(), 0.0);
        assert!(FrequencyModel::uniform(4).unwrap().prob(0).is_err());
    }

    #[test]
    fn tail_mass_examples() {
        assert_eq!(FrequencyModel::geometric(0.5).unwrap().tail_mass(2), 0.25);
        let z = FrequencyModel::zipf(2.0).unwrap();
        assert_relative_eq!(z.tail_mass(10), 6.0 / (10.0 * PI * PI), max_relative = 1e-14);
        assert_relative_eq!(z.survival(10), 0.057_854_194_645_034_66, max_relative = 1e-13);
        assert_eq!(FrequencyModel::uniform(4).unwrap().tail_mass(4), 0.0);
    }

    #[test]
    fn counting_function_examples() {
        let g = FrequencyModel::geometric(0.5).unwrap();
        assert_eq!(g.counting_function(0.25).unwrap(), 2);
        assert_eq!(g.counting_function(1.0).unwrap(), 0);
        assert_eq!(FrequencyModel::zipf(2.0).unwrap().counting_function(0.1).unwrap(), 2);
        assert!(g.counting_function(0.0).is_err());
    }

    #[test]
    fn truncation_index_examples() {
        assert_eq!(FrequencyModel::geometric(0.5).unwrap().truncation_index(0.25).unwrap(), 2);
        assert_eq!(FrequencyModel::uniform(100).unwrap().truncation_index(1e-9).unwrap(), 100);
        // Smallest J with 6/(π² J) <= 1e-3 is ceil(6000/π²) = 608.
        let expected = (6000.0 / (PI * PI)).ceil() as u64;
        assert_eq!(expected, 608);
        assert_eq!(FrequencyModel::zipf(2.0).unwrap().truncation_index(1e-3).unwrap(), expected);
    }

    #[test]
    fn truncation_index_overflow_is_reported() {
        assert!(matches!(FrequencyModel::fast_variation().truncation_index(1e-3), Err(UrnError::IndexOverflow)));
    }

    #[test]
    fn normalizers_match_high_precision_values() {
        assert_relative_eq!(FrequencyModel::fast_variation().normalizer(), 3.387_735_531_952_002, max_relative = 1e-13);
        assert_relative_eq!(FrequencyModel::stretched_geometric(0.5).unwrap().normalizer(), 3.788_219_230_647_954, max_relative = 1e-13);
        assert_relative_eq!(FrequencyModel::stretched_geometric(0.9).unwrap().normalizer(), 179.688_019_632_317_15, max_relative = 1e-13);
        assert_relative_eq!(FrequencyModel::stretched_geometric(0.95).unwrap().normalizer(), 759.677_198_861_380_1, max_relative = 1e-12);
        assert_relative_eq!(FrequencyModel::zipf(2.0).unwrap().normalizer(), PI * PI / 6.0, max_relative = 1e-15);
    }

    #[test]
    fn fastvar_survival_continuity_at_table_edge() {
        let m = FrequencyModel::fast_variation();
        let j = HEAD_LEN;
        let direct = fastvar_tail(j as f64 + 1.0) / m.normalizer();
        assert_relative_eq!(m.survival(j), direct, max_relative = 1e-13);
        assert_relative_eq!(m.survival(j - 1), direct + m.p(j), max_relative = 1e-13);
        assert_relative_eq!(m.survival(j + 1), direct - m.p(j + 1), max_relative = 1e-12);
    }

    #[test]
    fn fastvar_integral_matches_quadrature() {
        for a in [1.0f64, 10.0, 1000.0, 1e6] {
            let v = a.ln_1p();
            let rest = quadrature::integrate_to_infinity(&|w: f64| (-w).exp() / (-(-w).exp_m1() * w * w), v, 1e-17);
            assert_relative_eq!(fastvar_integral(a), 1.0 / v + rest.value, max_relative = 1e-12);
        }
    }

    #[test]
    fn survival_plus_prefix_is_one() {
        for m in all_models() {
            let mut acc = CompensatedSum::new();
            for j in 1..=200u64 {
                acc.add(m.p(j));
                assert_relative_eq!(acc.value() + m.survival(j), 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn explicit_is_sorted_and_normalized() {
        let m = FrequencyModel::explicit(vec![1.0, 3.0, 0.0, 4.0]).unwrap();
        assert_eq!(m.support(), Some(3));
        assert_relative_eq!(m.p(1), 0.5);
        assert_relative_eq!(m.p(3), 0.125);
        assert_eq!(m.p(4), 0.0);
    }

    #[test]
    fn zipf_counting_function_regular_variation() {
        let m = FrequencyModel::zipf(2.0).unwrap();
        let limit = m.normalizer().powf(-0.5);
        let x: f64 = 1e8;
        let ratio = m.counting_function(1.0 / x).unwrap() as f64 / x.sqrt();
        assert!((ratio / limit - 1.0).abs() < 0.02);
    }

    #[test]
    fn stretched_geometric_auxiliary_grows() {
        let m = FrequencyModel::stretched_geometric(0.5).unwrap();
        let values: Vec<f64> = (3..9).map(|e| m.auxiliary_a(10f64.powi(e)).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn parse_grammar() {
        assert_eq!("uniform:k=100".parse::<FrequencyModel>().unwrap().kind(), ModelKind::Uniform { k: 100 });
        assert_eq!("zipf:s=2.0".parse::<FrequencyModel>().unwrap().kind(), ModelKind::Zipf { s: 2.0 });
        assert_eq!("geom:q=0.5".parse::<FrequencyModel>().unwrap().kind(), ModelKind::Geometric { q: 0.5 });
        assert_eq!("fastvar".parse::<FrequencyModel>().unwrap().kind(), ModelKind::FastVariation);
        assert_eq!("explicit:0.2,0.8".parse::<FrequencyModel>().unwrap().support(), Some(2));
        assert!(matches!("zapf:s=2".parse::<FrequencyModel>(), Err(UrnError::UnknownFamily(_))));
        assert!(matches!("zipf:q=2".parse::<FrequencyModel>(), Err(UrnError::MalformedSpec { .. })));
        assert!("zipf:s=0.5".parse::<FrequencyModel>().is_err());
        let m: FrequencyModel = "sqrtgeom:q=0.5".parse().unwrap();
        assert_eq!(m.to_string().parse::<FrequencyModel>().unwrap().kind(), m.kind());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn tail_mass_dominates_partial_sums(idx in 0usize..8, j in 0u64..5000) {
                let m = &all_models()[idx];
                let partial: f64 = (j + 1..=j + 20_000).map(|k| m.p(k)).sum();
                prop_assert!(m.tail_mass(j) >= partial * (1.0 - 1e-12));
                prop_assert!(m.tail_mass(j) >= m.survival(j) * (1.0 - 1e-12));
            }

            #[test]
            fn probabilities_non_increasing(idx in 0usize..8, j in 1u64..100_000) {
                let m = &all_models()[idx];
                prop_assert!(m.p(j + 1) <= m.p(j));
                prop_assert!(m.p(j) >= 0.0);
            }

            #[test]
            fn counting_function_consistent(idx in 0usize..8, j in 1u64..3000, x in 1e-9f64..1.0, y in 1e-9f64..1.0) {
                let m = &all_models()[idx];
                let (lo, hi) = if x < y { (x, y) } else { (y, x) };
                prop_assert!(m.counting_function(lo).unwrap() >= m.counting_function(hi).unwrap());
                let pj = m.p(j);
                if pj > 0.0 {
                    prop_assert!(m.counting_function(pj).unwrap() >= j);
                }
            }
        }
    }
}
