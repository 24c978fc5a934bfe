//! Light-tail pathologies and asymptotic-equivalent tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use urn_core::estimators::good_turing;
use urn_core::moments::{
    expected_cumulative, expected_occupancy, karlin_asymptotics, var_missing_mass_poisson, Setting, DEFAULT_EPSILON,
};
use urn_core::sampler::{max_symbol_index, true_mass};
use urn_core::{FrequencyModel, Result, UrnError};

use crate::mc::{draw, replicate_map};
use crate::stats::{QuantityStats, Verdict};

/// `E[max index − K_n]` against `[0, (1-q)/q²]` for one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxGapRow {
    pub n: u64,
    pub mean_gap: f64,
    pub stderr: f64,
    pub upper: f64,
    pub verdict: Verdict,
}

/// Frequency of `{G_{n,0} = 0, M_{n,0} > 0}` for one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlindSpotRow {
    pub n: u64,
    pub frequency: f64,
    pub count: usize,
}

/// Mass of the two most frequent missing-mass values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPointResult {
    pub model: String,
    pub n: u64,
    pub two_point_mass: f64,
    pub values: Vec<(f64, f64)>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightTailReport {
    pub q: f64,
    pub replicates: usize,
    pub seed: u64,
    pub max_gap: Vec<MaxGapRow>,
    pub blind_spot: Vec<BlindSpotRow>,
    pub two_point: TwoPointResult,
}

impl LightTailReport {
    pub fn blind_spot_observed(&self) -> bool {
        self.blind_spot.iter().any(|row| row.count > 0)
    }
}

/// Geometric(`q`) diagnostics over `n_grid`, and the two-point concentration
/// of the missing mass for the Poisson(`lambda`) pmf at `two_point_n`.
pub fn experiment_lighttail(
    q: f64,
    n_grid: &[u64],
    lambda: f64,
    two_point_n: u64,
    replicates: usize,
    seed: u64,
) -> Result<LightTailReport> {
    if replicates < 2 {
        return Err(UrnError::Domain("light-tail diagnostics need at least two replicates".into()));
    }
    let model = FrequencyModel::geometric(q)?;
    let upper = (1.0 - q) / (q * q);
    let mut max_gap = Vec::new();
    let mut blind_spot = Vec::new();
    for &n in n_grid {
        let setting = Setting::Binomial { n };
        let rows = replicate_map(replicates, |i| -> Result<(f64, bool)> {
            let p = draw(&model, setting, seed, i)?;
            let gap = max_symbol_index(&p).map_or(0.0, |m| m as f64 - p.distinct() as f64);
            let blind = n > 0 && good_turing(&p, 0)? == 0.0 && true_mass(&model, &p, 0) > 0.0;
            Ok((gap, blind))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let gaps: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let stats = QuantityStats::from_values("max-K", &gaps);
        let se = stats.stderr.unwrap_or(0.0);
        max_gap.push(MaxGapRow {
            n,
            mean_gap: stats.mean,
            stderr: se,
            upper,
            verdict: Verdict::from_bool(stats.mean >= -3.0 * se && stats.mean <= upper + 3.0 * se),
        });
        let count = rows.iter().filter(|r| r.1).count();
        blind_spot.push(BlindSpotRow { n, frequency: count as f64 / replicates as f64, count });
    }
    let two_point = two_point_mass(&FrequencyModel::poisson_pmf(lambda)?, two_point_n, replicates, seed)?;
    Ok(LightTailReport { q, replicates, seed, max_gap, blind_spot, two_point })
}

/// PASS iff the two most frequent realized values of `M_{n,0}` carry at
/// least 95% of the replicates.
pub fn two_point_mass(model: &FrequencyModel, n: u64, replicates: usize, seed: u64) -> Result<TwoPointResult> {
    let setting = Setting::Binomial { n };
    let masses = replicate_map(replicates, |i| draw(model, setting, seed, i).map(|p| true_mass(model, &p, 0)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut freq: BTreeMap<u64, usize> = BTreeMap::new();
    for m in &masses {
        *freq.entry(m.to_bits()).or_insert(0) += 1;
    }
    let mut ranked: Vec<(f64, f64)> = freq
        .into_iter()
        .map(|(bits, c)| (f64::from_bits(bits), c as f64 / replicates as f64))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    ranked.truncate(5);
    let two_point_mass: f64 = ranked.iter().take(2).map(|v| v.1).sum();
    Ok(TwoPointResult {
        model: model.to_string(),
        n,
        two_point_mass,
        values: ranked,
        verdict: Verdict::from_bool(two_point_mass >= 0.95),
    })
}

/// Exact moment, asymptotic prediction and one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRow {
    pub n: u64,
    pub quantity: String,
    pub r: Option<u64>,
    pub exact: f64,
    pub predicted: f64,
    pub ratio: f64,
    pub realized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub model: String,
    pub seed: u64,
    pub rows: Vec<AsymptoticRow>,
}

impl AsymptoticsReport {
    pub fn row(&self, n: u64, quantity: &str, r: Option<u64>) -> Option<&AsymptoticRow> {
        self.rows.iter().find(|row| row.n == n && row.quantity == quantity && row.r == r)
    }
}

/// Exact binomial `E K_n`, `E K_{n,r}`, `E K_{n,r̄}` and Poisson `var M_0(n)`
/// against their asymptotic equivalents, with one realization per `n` when
/// `realize` is set.
pub fn experiment_asymptotics(
    model: &FrequencyModel,
    n_grid: &[u64],
    levels: &[u64],
    seed: u64,
    realize: bool,
) -> Result<AsymptoticsReport> {
    let mut rows = Vec::new();
    for (idx, &n) in n_grid.iter().enumerate() {
        let setting = Setting::Binomial { n };
        let sample = if realize { Some(draw(model, setting, seed, idx as u64)?) } else { None };
        let mut push = |quantity: &str, r: Option<u64>, exact: f64, predicted: f64, realized: Option<f64>| {
            rows.push(AsymptoticRow { n, quantity: quantity.into(), r, exact, predicted, ratio: exact / predicted, realized });
        };
        let base = karlin_asymptotics(model, n, 1)?;
        let ek = expected_cumulative(model, setting, 1, DEFAULT_EPSILON)?.value;
        push("EK", None, ek, base.ek, sample.as_ref().map(|p| p.distinct() as f64));
        for &r in levels {
            let pred = karlin_asymptotics(model, n, r)?;
            let ekr = expected_occupancy(model, setting, r, DEFAULT_EPSILON)?.value;
            push("EK_r", Some(r), ekr, pred.ek_r, sample.as_ref().map(|p| p.occupancy(r) as f64));
            let ekbar = expected_cumulative(model, setting, r, DEFAULT_EPSILON)?.value;
            push("EKbar_r", Some(r), ekbar, pred.ekbar_r, sample.as_ref().map(|p| p.cumulative(r) as f64));
        }
        let var_m0 = var_missing_mass_poisson(model, n as f64, DEFAULT_EPSILON)?.direct.value;
        push("var_M0", None, var_m0, base.var_m0, None);
    }
    Ok(AsymptoticsReport { model: model.to_string(), seed, rows })
}
