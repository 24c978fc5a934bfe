//! Exact sampling of binomial and Poissonized urn samples, occupancy
//! profiles and true masses.
//!
//! Frequent symbols are drawn by sequential conditional binomial splitting;
//! once fewer than one draw per symbol is expected, the remaining draws are
//! placed individually by inverting the survival function.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::freq_models::{FrequencyModel, INDEX_CAP};
use crate::special::CompensatedSum;

/// Sampling setting of a realized profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSetting {
    Binomial { n: u64 },
    Poisson { t: f64, n_realized: u64 },
}

/// Symbol counts `X_{n,j}` and occupancy profile `K_{n,r}` of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ProfileFile", try_from = "ProfileFile")]
pub struct OccupancyProfile {
    setting: ProfileSetting,
    counts: BTreeMap<u64, u64>,
    profile: BTreeMap<u64, u64>,
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    setting: ProfileSetting,
    n: u64,
    counts: Vec<(u64, u64)>,
}

impl From<OccupancyProfile> for ProfileFile {
    fn from(p: OccupancyProfile) -> Self {
        ProfileFile { setting: p.setting, n: p.n(), counts: p.counts.into_iter().collect() }
    }
}

impl TryFrom<ProfileFile> for OccupancyProfile {
    type Error = UrnError;

    fn try_from(file: ProfileFile) -> Result<Self> {
        let profile = OccupancyProfile::from_counts(file.setting, file.counts)?;
        if profile.n() != file.n {
            return Err(UrnError::InvalidParameter(format!(
                "profile declares n = {} but its counts sum to {}",
                file.n,
                profile.n()
            )));
        }
        Ok(profile)
    }
}

impl OccupancyProfile {
    /// Builds a profile from `(symbol, count)` pairs; zero counts are ignored
    /// and repeated symbols accumulate.
    pub fn from_counts(setting: ProfileSetting, pairs: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for (j, x) in pairs {
            if j == 0 {
                return Err(UrnError::InvalidParameter("symbol indices start at 1".into()));
            }
            if x > 0 {
                *counts.entry(j).or_insert(0) += x;
            }
        }
        let total: u64 = counts.values().sum();
        let expected = match setting {
            ProfileSetting::Binomial { n } => n,
            ProfileSetting::Poisson { n_realized, .. } => n_realized,
        };
        if total != expected {
            return Err(UrnError::Setting(format!("counts sum to {total} but the setting records {expected} draws")));
        }
        Ok(Self::from_map(setting, counts))
    }

    /// Binomial profile of an externally observed sample.
    pub fn from_observed(pairs: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let pairs: Vec<_> = pairs.into_iter().collect();
        let n = pairs.iter().map(|&(_, x)| x).sum();
        Self::from_counts(ProfileSetting::Binomial { n }, pairs)
    }

    fn from_map(setting: ProfileSetting, counts: BTreeMap<u64, u64>) -> Self {
        let mut profile = BTreeMap::new();
        for &x in counts.values() {
            *profile.entry(x).or_insert(0) += 1;
        }
        Self { setting, counts, profile }
    }

    pub fn setting(&self) -> ProfileSetting {
        self.setting
    }

    /// Sample size (realized size in the Poisson setting).
    pub fn n(&self) -> u64 {
        match self.setting {
            ProfileSetting::Binomial { n } => n,
            ProfileSetting::Poisson { n_realized, .. } => n_realized,
        }
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn profile(&self) -> &BTreeMap<u64, u64> {
        &self.profile
    }

    /// `K_n`, the number of distinct symbols.
    pub fn distinct(&self) -> u64 {
        self.counts.len() as u64
    }

    /// `K_{n,r}`.
    pub fn occupancy(&self, r: u64) -> u64 {
        self.profile.get(&r).copied().unwrap_or(0)
    }

    /// `K_{n,r̄} = Σ_{s>=r} K_{n,s}`.
    pub fn cumulative(&self, r: u64) -> u64 {
        self.profile.range(r.max(1)..).map(|(_, k)| k).sum()
    }

    /// Profile of the concatenation of two binomial samples.
    pub fn concat(&self, other: &OccupancyProfile) -> Result<Self> {
        match (self.setting, other.setting) {
            (ProfileSetting::Binomial { n: a }, ProfileSetting::Binomial { n: b }) => {
                let mut counts = self.counts.clone();
                for (&j, &x) in &other.counts {
                    *counts.entry(j).or_insert(0) += x;
                }
                Ok(Self::from_map(ProfileSetting::Binomial { n: a + b }, counts))
            }
            _ => Err(UrnError::Setting("only binomial samples can be concatenated".into())),
        }
    }

    /// Writes `j,count` rows with a header.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["j", "count"]).map_err(csv_error)?;
        for (j, x) in &self.counts {
            w.serialize((j, x)).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `j,count` rows (header optional, `#` lines ignored) as an
    /// observed binomial sample.
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut pairs = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record.map_err(csv_error)?;
            if line == 0 && record.get(0).is_some_and(|f| f.parse::<u64>().is_err()) {
                continue;
            }
            let field = |i: usize| -> Result<u64> {
                record
                    .get(i)
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| UrnError::InvalidParameter(format!("line {}: expected `j,count` integers", line + 1)))
            };
            pairs.push((field(0)?, field(1)?));
        }
        Self::from_observed(pairs)
    }
}

fn csv_error(e: csv::Error) -> UrnError {
    UrnError::InvalidParameter(format!("csv: {e}"))
}

/// Generator for replicate `index` of an experiment seeded with `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws `n` i.i.d. symbols from `model`; deterministic given `seed`.
pub fn sample_binomial(model: &FrequencyModel, n: u64, seed: u64) -> OccupancyProfile {
    sample_binomial_with(model, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Draws `N ~ Poisson(t)` and then `N` i.i.d. symbols; deterministic given `seed`.
pub fn sample_poisson(model: &FrequencyModel, t: f64, seed: u64) -> Result<OccupancyProfile> {
    sample_poisson_with(model, t, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_poisson_with(model: &FrequencyModel, t: f64, rng: &mut impl RngCore) -> Result<OccupancyProfile> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(UrnError::Domain(format!("Poisson intensity must be finite and non-negative, got {t}")));
    }
    let n_realized = if t == 0.0 { 0 } else { Poisson::new(t).expect("positive intensity").sample(rng) as u64 };
    let mut profile = sample_binomial_with(model, n_realized, rng);
    profile.setting = ProfileSetting::Poisson { t, n_realized };
    Ok(profile)
}

pub fn sample_binomial_with(model: &FrequencyModel, n: u64, rng: &mut impl RngCore) -> OccupancyProfile {
    let mut counts = BTreeMap::new();
    let mut remaining = n;
    let mut j = 0u64;
    let mut mass_left = 1.0;
    let support = model.support();
    while remaining > 0 {
        let p = model.p(j + 1);
        let last = support == Some(j + 1);
        if support.is_none() && (remaining as f64) * p < 1.0 {
            break;
        }
        j += 1;
        let x = if last || p >= mass_left {
            remaining
        } else {
            Binomial::new(remaining, p / mass_left).expect("probability in [0,1]").sample(rng)
        };
        if x > 0 {
            counts.insert(j, x);
            remaining -= x;
        }
        mass_left = model.survival(j);
        if last {
            break;
        }
    }
    if remaining > 0 {
        let head = j;
        let head_mass = model.survival(head);
        let mut synthetic = INDEX_CAP;
        for _ in 0..remaining {
            let u = (rng.next_u64() as f64 + 0.5) * (-64f64).exp2();
            let symbol = invert_survival(model, head, head_mass * u).unwrap_or_else(|| {
                synthetic += 1;
                synthetic
            });
            *counts.entry(symbol).or_insert(0) += 1;
        }
    }
    OccupancyProfile::from_map(ProfileSetting::Binomial { n }, counts)
}

/// Smallest `k > head` with `S(k) < target`, or `None` beyond [`INDEX_CAP`].
fn invert_survival(model: &FrequencyModel, head: u64, target: f64) -> Option<u64> {
    let mut lo = head;
    let mut step = 1u64;
    let mut hi = loop {
        let candidate = head.checked_add(step).filter(|&c| c <= INDEX_CAP)?;
        if model.survival(candidate) < target {
            break candidate;
        }
        lo = candidate;
        step = step.saturating_mul(2);
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if model.survival(mid) < target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// `M_{n,r} = Σ_j p_j 1{X_{n,j} = r}`; `M_{n,0}` is the complement of the
/// occupied mass. Assumes `profile` was drawn from `model`.
pub fn true_mass(model: &FrequencyModel, profile: &OccupancyProfile, r: u64) -> f64 {
    let p = |j: u64| if j > INDEX_CAP { 0.0 } else { model.p(j) };
    if r == 0 {
        let occupied: CompensatedSum = profile.counts.keys().map(|&j| p(j)).collect();
        (1.0 - occupied.value()).max(0.0)
    } else {
        profile.counts.iter().filter(|&(_, &x)| x == r).map(|(&j, _)| p(j)).collect::<CompensatedSum>().value()
    }
}

/// Largest occupied symbol index, `None` for an empty sample.
pub fn max_symbol_index(profile: &OccupancyProfile) -> Option<u64> {
    profile.counts.keys().next_back().copied()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_and_se(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
        let v: Vec<f64> = xs.collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt(), v.len())
    }

    #[test]
    fn single_symbol_and_empty() {
        let m = FrequencyModel::uniform(1).unwrap();
        let p = sample_binomial(&m, 5, 17);
        assert_eq!(p.counts(), &BTreeMap::from([(1, 5)]));
        assert_eq!(p.profile(), &BTreeMap::from([(5, 1)]));
        assert_eq!(true_mass(&m, &p, 0), 0.0);
        assert_eq!(max_symbol_index(&p), Some(1));
        let z = FrequencyModel::zipf(2.0).unwrap();
        let e = sample_binomial(&z, 0, 3);
        assert_eq!(e.distinct(), 0);
        assert_eq!(max_symbol_index(&e), None);
        let e = sample_poisson(&z, 0.0, 3).unwrap();
        assert_eq!(e.setting(), ProfileSetting::Poisson { t: 0.0, n_realized: 0 });
    }

    #[test]
    fn true_mass_one_urn_empty() {
        let m = FrequencyModel::uniform(2).unwrap();
        let p = OccupancyProfile::from_observed([(1, 2)]).unwrap();
        assert_eq!(true_mass(&m, &p, 0), 0.5);
        assert_eq!(true_mass(&m, &p, 2), 0.5);
        assert_eq!(true_mass(&m, &p, 1), 0.0);
    }

    #[test]
    fn max_index_example() {
        let p = OccupancyProfile::from_observed([(3, 1), (7, 2)]).unwrap();
        assert_eq!(max_symbol_index(&p), Some(7));
    }

    #[test]
    fn uniform_two_moments() {
        let m = FrequencyModel::uniform(2).unwrap();
        let samples: Vec<_> = (0..100_000).map(|i| sample_binomial_with(&m, 2, &mut replicate_rng(1, i))).collect();
        let (mean, se, _) = mean_and_se(samples.iter().map(|p| p.distinct() as f64));
        assert!((mean - 1.5).abs() <= 3.0 * se);
        let (mean, se, _) = mean_and_se(samples.iter().map(|p| true_mass(&m, p, 0)));
        assert!((mean - 0.25).abs() <= 3.0 * se);
    }

    #[test]
    fn poisson_coverage_moments() {
        let m1 = FrequencyModel::uniform(1).unwrap();
        let (mean, se, _) = mean_and_se((0..100_000).map(|i| sample_poisson_with(&m1, 2.0, &mut replicate_rng(2, i)).unwrap().distinct() as f64));
        assert!((mean - (1.0 - (-2.0f64).exp())).abs() <= 3.0 * se);

        let m2 = FrequencyModel::uniform(2).unwrap();
        let ks: Vec<f64> = (0..100_000).map(|i| sample_poisson_with(&m2, 2.0, &mut replicate_rng(3, i)).unwrap().distinct() as f64).collect();
        let n = ks.len() as f64;
        let mean = ks.iter().sum::<f64>() / n;
        let var = ks.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let fourth = ks.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        let se_var = ((fourth - var * var) / n).sqrt();
        let target = 2.0 * ((-1.0f64).exp() - (-2.0f64).exp());
        assert!((var - target).abs() <= 3.0 * se_var);
    }

    #[test]
    fn geometric_max_index_gap() {
        let m = FrequencyModel::geometric(0.5).unwrap();
        let (mean, se, _) = mean_and_se((0..10_000).map(|i| {
            let p = sample_binomial_with(&m, 100, &mut replicate_rng(4, i));
            max_symbol_index(&p).unwrap() as f64 - p.distinct() as f64
        }));
        assert!(mean >= -3.0 * se && mean <= 2.0 + 3.0 * se);
    }

    #[test]
    fn tail_region_is_sampled() {
        let m = FrequencyModel::zipf(1.1).unwrap();
        let p = sample_binomial(&m, 100_000, 9);
        assert!(max_symbol_index(&p).unwrap() > 1_000_000);
        assert_eq!(p.counts().values().sum::<u64>(), 100_000);
    }

    #[test]
    fn fast_variation_reaches_synthetic_indices() {
        let m = FrequencyModel::fast_variation();
        let p = sample_binomial(&m, 200_000, 5);
        assert_eq!(p.n(), 200_000);
        let m0 = true_mass(&m, &p, 0);
        assert!(m0 > 0.0 && m0 < 1.0);
    }

    #[test]
    fn geometric_frequencies() {
        let m = FrequencyModel::geometric(0.3).unwrap();
        let p = sample_binomial(&m, 1_000_000, 11);
        for j in 1..6u64 {
            let expected = 1e6 * m.p(j);
            let got = *p.counts().get(&j).unwrap() as f64;
            assert!((got - expected).abs() < 5.0 * expected.sqrt());
        }
    }

    #[test]
    fn csv_and_json_round_trip() {
        let m = FrequencyModel::zipf(1.5).unwrap();
        let p = sample_binomial(&m, 1000, 8);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = OccupancyProfile::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, p);
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"counts\":[[1,"));
        let back: OccupancyProfile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        let bad = json.replace("\"n\":1000", "\"n\":999");
        assert!(serde_json::from_str::<OccupancyProfile>(&bad).is_err());
    }

    #[test]
    fn csv_skips_comment_lines() {
        let text = "# config: {\"seed\":1,\"s_grid\":[0.5,1.0]}\nj,count\n1,3\n# trailing note\n4,1\n";
        let p = OccupancyProfile::read_csv(text.as_bytes()).unwrap();
        assert_eq!(p.n(), 4);
        assert_eq!(p.occupancy(3), 1);
    }

    #[test]
    fn concat_adds_counts() {
        let a = OccupancyProfile::from_observed([(1, 2), (3, 1)]).unwrap();
        let b = OccupancyProfile::from_observed([(3, 1), (4, 1)]).unwrap();
        let c = a.concat(&b).unwrap();
        assert_eq!(c.n(), 5);
        assert_eq!(c.occupancy(2), 2);
        assert_eq!(c.occupancy(1), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn model(idx: usize) -> FrequencyModel {
            match idx {
                0 => FrequencyModel::zipf(2.0).unwrap(),
                1 => FrequencyModel::geometric(0.4).unwrap(),
                2 => FrequencyModel::stretched_geometric(0.7).unwrap(),
                3 => FrequencyModel::fast_variation(),
                4 => FrequencyModel::poisson_pmf(0.5).unwrap(),
                _ => FrequencyModel::uniform(7).unwrap(),
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn profile_consistency(idx in 0usize..6, n in 0u64..5000, seed in any::<u64>()) {
                let m = model(idx);
                let p = sample_binomial(&m, n, seed);
                let weighted: u64 = p.profile().iter().map(|(r, k)| r * k).sum();
                prop_assert_eq!(weighted, n);
                prop_assert_eq!(p.profile().values().sum::<u64>(), p.distinct());
                for r in 1..8 {
                    prop_assert!(p.cumulative(r + 1) <= p.cumulative(r));
                }
                let total: f64 = (0..=n.min(5000)).filter(|&r| r == 0 || p.occupancy(r) > 0).map(|r| true_mass(&m, &p, r)).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }

            #[test]
            fn deterministic(idx in 0usize..6, n in 0u64..2000, seed in any::<u64>()) {
                let m = model(idx);
                prop_assert_eq!(sample_binomial(&m, n, seed), sample_binomial(&m, n, seed));
                let a = sample_poisson(&m, n as f64, seed).unwrap();
                let b = sample_poisson(&m, n as f64, seed).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
