//! Seeded, parallel Monte Carlo replicates and the checks built on them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use urn_core::bounds::{gt_gap_bounds, knr_bound, missing_mass_bounds, Side, SubGammaBound};
use urn_core::estimators::{clt_normalizer, good_turing, gt_ci_poisson};
use urn_core::moments::{expected_mass, moment_report, variance_proxies, Setting, DEFAULT_EPSILON};
use urn_core::sampler::{replicate_rng, sample_binomial_with, sample_poisson_with, true_mass, OccupancyProfile};
use urn_core::{FrequencyModel, Result, UrnError};

use crate::stats::{ks_standard_normal, tail_verdict, KsTest, QuantityStats, Verdict};

/// Default exceedance exponents for tail checks.
pub const DEFAULT_S_GRID: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

/// Highest occupancy level tracked per replicate.
pub const TRACKED_LEVELS: u64 = 10;

/// Draws replicate `i` for `i in 0..replicates` in parallel and returns the
/// results in replicate order.
pub fn replicate_map<T: Send>(replicates: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..replicates as u64).into_par_iter().map(f).collect()
}

/// Draws one profile for replicate `index`.
pub fn draw(model: &FrequencyModel, setting: Setting, seed: u64, index: u64) -> Result<OccupancyProfile> {
    let mut rng = replicate_rng(seed, index);
    match setting {
        Setting::Binomial { n } => Ok(sample_binomial_with(model, n, &mut rng)),
        Setting::Poisson { t } => sample_poisson_with(model, t, &mut rng),
    }
}

/// Empirical exceedance of one bound at one exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub quantity: String,
    pub side: Side,
    pub anchor: String,
    pub s: f64,
    pub radius: f64,
    pub empirical: f64,
    pub bound: f64,
    pub slack: f64,
    pub verdict: Verdict,
}

/// Monte Carlo report: statistics, bound checks and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub experiment: String,
    pub model: String,
    pub setting: Setting,
    pub replicates: usize,
    pub seed: u64,
    pub quantities: Vec<QuantityStats>,
    pub bounds: Vec<BoundCheck>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl McReport {
    fn new(experiment: &str, model: &FrequencyModel, setting: Setting, replicates: usize, seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            model: model.to_string(),
            setting,
            replicates,
            seed,
            quantities: Vec::new(),
            bounds: Vec::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn quantity(&self, name: &str) -> Option<&QuantityStats> {
        self.quantities.iter().find(|q| q.name == name)
    }

    pub fn all_pass(&self) -> bool {
        !self.bounds.iter().any(|b| b.verdict.is_fail())
    }
}

fn require_replicates(replicates: usize) -> Result<()> {
    if replicates == 0 {
        Err(UrnError::Domain("at least one replicate is required".into()))
    } else {
        Ok(())
    }
}

fn denominator(setting: Setting) -> f64 {
    match setting {
        Setting::Binomial { n } => n as f64,
        Setting::Poisson { t } => t,
    }
}

/// Moments of `K_n`, `K_{n,r}` (`r <= 10`), `M_{n,0}`, `G_{n,0}` and
/// `G_{n,0} - M_{n,0}` over `replicates` independent samples.
pub fn run_replicates(model: &FrequencyModel, setting: Setting, replicates: usize, seed: u64) -> Result<McReport> {
    require_replicates(replicates)?;
    let rows = replicate_map(replicates, |i| -> Result<Vec<f64>> {
        let p = draw(model, setting, seed, i)?;
        let m0 = true_mass(model, &p, 0);
        let g0 = if denominator(setting) > 0.0 { good_turing(&p, 0)? } else { 0.0 };
        let mut row = vec![p.distinct() as f64];
        row.extend((1..=TRACKED_LEVELS).map(|r| p.occupancy(r) as f64));
        row.extend([m0, g0, g0 - m0]);
        Ok(row)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut names = vec!["K".to_string()];
    names.extend((1..=TRACKED_LEVELS).map(|r| format!("K_{r}")));
    names.extend(["M_0".to_string(), "G_0".to_string(), "G_0-M_0".to_string()]);
    let mut report = McReport::new("replicates", model, setting, replicates, seed);
    for (col, name) in names.iter().enumerate() {
        let values: Vec<f64> = rows.iter().map(|row| row[col]).collect();
        report.quantities.push(QuantityStats::from_values(name, &values));
    }
    Ok(report)
}

fn check_bound(
    report: &mut McReport,
    bound: &SubGammaBound,
    deviations: &[f64],
    s_grid: &[f64],
) -> Result<()> {
    let r = deviations.len();
    for &s in s_grid {
        let radius = bound.tail_radius(s)?;
        let hits = deviations
            .iter()
            .filter(|&&d| match bound.side {
                Side::Right => d > radius,
                Side::Left => -d > radius,
                Side::Both => d.abs() >= radius,
            })
            .count();
        let empirical = hits as f64 / r as f64;
        let prob = bound.exceedance_probability(s);
        let (slack, verdict) = tail_verdict(empirical, prob, r);
        report.bounds.push(BoundCheck {
            quantity: bound.quantity.clone(),
            side: bound.side,
            anchor: bound.anchor.clone(),
            s,
            radius,
            empirical,
            bound: prob,
            slack,
            verdict,
        });
    }
    Ok(())
}

/// Empirical tail exceedances against every applicable bound.
///
/// Binomial settings check the missing-mass left and right tails (with the
/// slow-variation factor for de Haan models once `n >= n0`) and `K_{n,r}`
/// for `r = 1, 2, 3`; Poisson settings check both tails of the Good–Turing
/// gap `G_0(t) - M_0(t)`.
pub fn check_tail_bounds(
    model: &FrequencyModel,
    setting: Setting,
    replicates: usize,
    seed: u64,
    s_grid: &[f64],
    n0: u64,
) -> Result<McReport> {
    require_replicates(replicates)?;
    let mut report = McReport::new("tail_bounds", model, setting, replicates, seed);
    match setting {
        Setting::Binomial { n } => {
            let moments = moment_report(model, setting, 4, DEFAULT_EPSILON)?;
            let proxies = variance_proxies(model, n.max(1), DEFAULT_EPSILON)?;
            let em0 = moments.mass(0)?;
            let samples = replicate_map(replicates, |i| -> Result<[f64; 4]> {
                let p = draw(model, setting, seed, i)?;
                Ok([true_mass(model, &p, 0), p.occupancy(1) as f64, p.occupancy(2) as f64, p.occupancy(3) as f64])
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let m0: Vec<f64> = samples.iter().map(|s| s[0] - em0).collect();
            let (left, right_plus) = missing_mass_bounds(&proxies, u64::MAX)?;
            check_bound(&mut report, &left, &m0, s_grid)?;
            check_bound(&mut report, &right_plus, &m0, s_grid)?;
            if proxies.v_slow.is_some() && n >= n0 {
                let (_, right_slow) = missing_mass_bounds(&proxies, n0)?;
                check_bound(&mut report, &right_slow, &m0, s_grid)?;
            }
            for r in 1..=3u64 {
                let b = knr_bound(&moments, r)?;
                let ekr = moments.occupancy(r)?;
                let dev: Vec<f64> = samples.iter().map(|s| s[r as usize] - ekr).collect();
                check_bound(&mut report, &b.bound, &dev, s_grid)?;
            }
            let raw: Vec<f64> = samples.iter().map(|s| s[0]).collect();
            let stats = QuantityStats::from_values("M_0", &raw);
            if let Some(var) = stats.variance.filter(|&v| v > 0.0) {
                report.diagnostics.insert("v_minus_over_var_mc".into(), proxies.v_minus.value / var);
                report.diagnostics.insert("v_plus_over_var_mc".into(), proxies.v_plus.value / var);
            }
            report.diagnostics.insert("v_minus".into(), proxies.v_minus.value);
            report.diagnostics.insert("v_plus".into(), proxies.v_plus.value);
            if let Some(v) = proxies.v_slow {
                report.diagnostics.insert("v_slow".into(), v);
            }
            report.diagnostics.insert("E_M_0".into(), em0);
            report.quantities.push(stats);
        }
        Setting::Poisson { t } => {
            let (upper, lower) = gt_gap_bounds(model, t, DEFAULT_EPSILON)?;
            let gaps = replicate_map(replicates, |i| -> Result<f64> {
                let p = draw(model, setting, seed, i)?;
                Ok(good_turing(&p, 0)? - true_mass(model, &p, 0))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            check_bound(&mut report, &upper, &gaps, s_grid)?;
            let flipped: Vec<f64> = gaps.iter().map(|g| -g).collect();
            check_bound(&mut report, &lower, &flipped, s_grid)?;
            report.quantities.push(QuantityStats::from_values("G_0-M_0", &gaps));
        }
    }
    Ok(report)
}

/// Empirical threshold from which the slow-variation right-tail bound holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct N0Search {
    /// `(n, every slow-variation check passed)` along the grid.
    pub grid: Vec<(u64, bool)>,
    /// Smallest grid value from which every larger grid value passes.
    pub n0: Option<u64>,
}

pub fn n0_search(model: &FrequencyModel, n_grid: &[u64], replicates: usize, seed: u64, s_grid: &[f64]) -> Result<N0Search> {
    if !model.is_de_haan() {
        return Err(UrnError::NoAsymptotics);
    }
    let mut grid = Vec::new();
    for &n in n_grid {
        let report = check_tail_bounds(model, Setting::Binomial { n }, replicates, seed, s_grid, 0)?;
        let ok = report
            .bounds
            .iter()
            .filter(|b| b.anchor.contains("slow variation"))
            .all(|b| !b.verdict.is_fail());
        grid.push((n, ok));
    }
    let mut sorted = grid.clone();
    sorted.sort_by_key(|&(n, _)| n);
    let n0 = sorted
        .iter()
        .rposition(|&(_, ok)| !ok)
        .map_or(sorted.first().map(|&(n, _)| n), |i| sorted.get(i + 1).map(|&(n, _)| n));
    Ok(N0Search { grid, n0 })
}

/// Fraction of replicates whose true missing mass lies in the interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub model: String,
    pub t: f64,
    pub delta: f64,
    pub replicates: usize,
    pub seed: u64,
    pub target: f64,
    pub coverage: f64,
    pub stderr: f64,
    pub clipped_fraction: f64,
    pub verdict: Verdict,
}

/// PASS iff coverage `>= 1 - 4δ - 3·√((1-4δ)4δ/R)`.
pub fn check_ci_coverage(model: &FrequencyModel, t: f64, delta: f64, replicates: usize, seed: u64) -> Result<CoverageResult> {
    require_replicates(replicates)?;
    let setting = Setting::Poisson { t };
    let hits = replicate_map(replicates, |i| -> Result<(bool, bool)> {
        let p = draw(model, setting, seed, i)?;
        let ci = gt_ci_poisson(&p, t, delta)?;
        let m0 = true_mass(model, &p, 0);
        Ok((ci.lower <= m0 && m0 <= ci.upper, ci.clipped))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let r = replicates as f64;
    let coverage = hits.iter().filter(|h| h.0).count() as f64 / r;
    let clipped_fraction = hits.iter().filter(|h| h.1).count() as f64 / r;
    let target = 1.0 - 4.0 * delta;
    let stderr = (target * (1.0 - target) / r).sqrt();
    Ok(CoverageResult {
        model: model.to_string(),
        t,
        delta,
        replicates,
        seed,
        target,
        coverage,
        stderr,
        clipped_fraction,
        verdict: Verdict::from_bool(coverage >= target - 3.0 * stderr),
    })
}

/// Normality check of the standardized Good–Turing ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltResult {
    pub model: String,
    pub t: f64,
    pub replicates: usize,
    pub seed: u64,
    pub normalizer: Option<f64>,
    /// Replicates dropped because the missing mass was zero.
    pub dropped: usize,
    pub ks: Option<KsTest>,
    pub verdict: Verdict,
}

/// KS test of `c_t (G_0(t)/M_0(t) - 1)` against the standard normal at
/// level 0.01; skipped when the missing mass vanishes in every replicate.
pub fn check_clt(model: &FrequencyModel, t: f64, replicates: usize, seed: u64) -> Result<CltResult> {
    require_replicates(replicates)?;
    let setting = Setting::Poisson { t };
    let report = moment_report(model, setting, 2, DEFAULT_EPSILON)?;
    let normalizer = clt_normalizer(&report).ok();
    let ratios = replicate_map(replicates, |i| -> Result<Option<f64>> {
        let p = draw(model, setting, seed, i)?;
        let m0 = true_mass(model, &p, 0);
        (m0 > 0.0).then(|| good_turing(&p, 0).map(|g| g / m0 - 1.0)).transpose()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let kept: Vec<f64> = ratios.iter().flatten().copied().collect();
    let dropped = replicates - kept.len();
    let (ks, verdict) = match normalizer {
        Some(c) if kept.len() > 1 && expected_mass(model, setting, 0, DEFAULT_EPSILON)?.value > 0.0 => {
            let z: Vec<f64> = kept.iter().map(|x| c * x).collect();
            let ks = ks_standard_normal(&z);
            (Some(ks), Verdict::from_bool(ks.p_value > 0.01))
        }
        _ => (None, Verdict::Skip),
    };
    Ok(CltResult { model: model.to_string(), t, replicates, seed, normalizer, dropped, ks, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_two_replicates() {
        let m = FrequencyModel::uniform(2).unwrap();
        let rep = run_replicates(&m, Setting::Binomial { n: 2 }, 200_000, 7).unwrap();
        let k = rep.quantity("K").unwrap();
        assert!((k.mean - 1.5).abs() <= 3.0 * k.stderr.unwrap());
        assert!((k.variance.unwrap() - 0.25).abs() <= 3.0 * k.variance_stderr.unwrap());
        let one = run_replicates(&m, Setting::Binomial { n: 2 }, 1, 7).unwrap();
        assert_eq!(one.quantity("K").unwrap().variance, None);
    }

    #[test]
    fn same_seed_same_report() {
        let m = FrequencyModel::zipf(2.0).unwrap();
        let a = run_replicates(&m, Setting::Poisson { t: 500.0 }, 500, 3).unwrap();
        let b = run_replicates(&m, Setting::Poisson { t: 500.0 }, 500, 3).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn degenerate_model_passes_everything() {
        let m = FrequencyModel::uniform(1).unwrap();
        let rep = check_tail_bounds(&m, Setting::Binomial { n: 50 }, 200, 1, &DEFAULT_S_GRID, 1000).unwrap();
        assert!(rep.all_pass());
        let rep = check_tail_bounds(&m, Setting::Poisson { t: 50.0 }, 200, 1, &DEFAULT_S_GRID, 1000).unwrap();
        assert!(rep.all_pass());
        let cov = check_ci_coverage(&m, 50.0, 0.05, 200, 1).unwrap();
        assert_eq!(cov.coverage, 1.0);
        let clt = check_clt(&m, 50.0, 50, 1).unwrap();
        assert_eq!(clt.verdict, Verdict::Skip);
    }

    #[test]
    fn good_turing_bias_orders() {
        let m = FrequencyModel::geometric(0.3).unwrap();
        let n = 200u64;
        let rep = run_replicates(&m, Setting::Binomial { n }, 20_000, 11).unwrap();
        let gap = rep.quantity("G_0-M_0").unwrap();
        let se = gap.stderr.unwrap();
        assert!(gap.mean >= -3.0 * se && gap.mean <= 1.0 / n as f64 + 3.0 * se);
        let rep = run_replicates(&m, Setting::Poisson { t: 200.0 }, 20_000, 12).unwrap();
        let gap = rep.quantity("G_0-M_0").unwrap();
        assert!(gap.mean.abs() <= 3.0 * gap.stderr.unwrap());
    }

    #[test]
    fn n0_search_requires_de_haan() {
        let m = FrequencyModel::zipf(2.0).unwrap();
        assert!(n0_search(&m, &[100], 10, 1, &DEFAULT_S_GRID).is_err());
    }
}
