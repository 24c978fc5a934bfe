//! The fourteen acceptance criteria, each returning a verdict with details.

use serde::{Deserialize, Serialize};

use urn_core::bounds::{gt_gap_bounds, knrbar_log_laplace, knrbar_variance_factor, missing_mass_bounds, missing_mass_log_laplace_series, DEFAULT_N0};
use urn_core::estimators::{alpha_hat, species_estimate, SpeciesBasis, SpeciesRegime};
use urn_core::moments::{
    binomial_variances_finite, expected_coverage, expected_mass, expected_occupancy, moment_report, var_coverage_poisson,
    var_missing_mass_poisson, variance_proxies, Setting, DEFAULT_EPSILON,
};
use urn_core::{FrequencyModel, Result};

use crate::enumerate::{poisson_gap_log_mgf, Enumeration};
use crate::experiments::{experiment_asymptotics, experiment_lighttail};
use crate::mc::{check_ci_coverage, check_clt, check_tail_bounds, draw, n0_search, replicate_map, run_replicates, DEFAULT_S_GRID};
use crate::stats::{QuantityStats, Verdict};

pub const CRITERIA: u32 = 14;

/// Seed and replicate count shared by all criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceConfig {
    pub seed: u64,
    pub replicates: usize,
    pub n0: u64,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        Self { seed: 0, replicates: 10_000, n0: DEFAULT_N0 }
    }
}

/// Verdict of one criterion with human-readable evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub title: String,
    pub verdict: Verdict,
    pub details: Vec<String>,
}

impl CriterionOutcome {
    /// `criterion NN PASS|FAIL: title`.
    pub fn line(&self) -> String {
        let verdict = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skip => "SKIP",
        };
        format!("criterion {:02} {verdict}: {}", self.id, self.title)
    }
}

pub fn title(id: u32) -> &'static str {
    match id {
        1 => "exact-oracle equivalence on small instances",
        2 => "Good identity (n+1) E M_{n,0} = E K_{n+1,1}",
        3 => "birthday example E K(100), var K(100)",
        4 => "variance sandwich E K_1(2t)/2 <= var K(t) <= E K_1(t)",
        5 => "Poisson missing-mass variance against Monte Carlo",
        6 => "log-MGF dominance on small instances",
        7 => "tail-bound domination at n = 10^4",
        8 => "variance-proxy tightness under regular variation",
        9 => "Good-Turing interval coverage",
        10 => "ratio CLT Kolmogorov-Smirnov test",
        11 => "asymptotic equivalents at n = 10^6",
        12 => "index estimate and species forecast",
        13 => "light-tail pathologies",
        14 => "determinism under re-runs and worker counts",
        _ => "unknown criterion",
    }
}

/// Runs criterion `id`; evaluation errors become a FAIL with the error text.
pub fn run_criterion(id: u32, cfg: &AcceptanceConfig) -> CriterionOutcome {
    let mut details = Vec::new();
    let result = match id {
        1 => exact_oracle(&mut details),
        2 => good_identity(&mut details),
        3 => birthday(&mut details),
        4 => variance_sandwich(&mut details),
        5 => missing_mass_variance(cfg, &mut details),
        6 => mgf_dominance(&mut details),
        7 => tail_domination(cfg, &mut details),
        8 => proxy_tightness(cfg, &mut details),
        9 => ci_coverage(cfg, &mut details),
        10 => ratio_clt(cfg, &mut details),
        11 => karlin(&mut details),
        12 => index_and_species(cfg, &mut details),
        13 => light_tail(cfg, &mut details),
        14 => determinism(cfg, &mut details),
        _ => Ok(false),
    };
    let verdict = match result {
        Ok(ok) => Verdict::from_bool(ok),
        Err(e) => {
            details.push(format!("error: {e}"));
            Verdict::Fail
        }
    };
    CriterionOutcome { id, title: title(id).into(), verdict, details }
}

pub fn run_all(cfg: &AcceptanceConfig) -> Vec<CriterionOutcome> {
    (1..=CRITERIA).map(|id| run_criterion(id, cfg)).collect()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()) + 1e-15
}

/// Models with support of at most four symbols.
pub fn small_models() -> Result<Vec<FrequencyModel>> {
    let mut models = (1..=4).map(FrequencyModel::uniform).collect::<Result<Vec<_>>>()?;
    for probs in [vec![0.9, 0.1], vec![0.5, 0.3, 0.2], vec![0.7, 0.2, 0.05, 0.05], vec![0.4, 0.3, 0.2, 0.1]] {
        models.push(FrequencyModel::explicit(probs)?);
    }
    Ok(models)
}

fn exact_oracle(details: &mut Vec<String>) -> Result<bool> {
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut checked = 0;
    for model in small_models()? {
        for n in 1..=4u32 {
            let e = Enumeration::binomial(&model, n)?;
            let setting = Setting::Binomial { n: n as u64 };
            let mut pairs = vec![(
                "EK".to_string(),
                expected_coverage(&model, setting, 1e-14)?.value,
                e.expectation(|o| Enumeration::cumulative(o, 1)),
            )];
            for r in 1..=n {
                pairs.push((format!("EK_{r}"), expected_occupancy(&model, setting, r as u64, 1e-14)?.value, e.expectation(|o| Enumeration::occupancy(o, r))));
            }
            for r in 0..=n {
                pairs.push((format!("EM_{r}"), expected_mass(&model, setting, r as u64, 1e-14)?.value, e.expectation(|o| e.mass(o, r))));
            }
            let v = binomial_variances_finite(&model, n as u64)?;
            pairs.push(("varK".into(), v.var_k, e.variance(|o| Enumeration::cumulative(o, 1))));
            pairs.push(("varM0".into(), v.var_m0, e.variance(|o| e.mass(o, 0))));
            for (name, computed, exact) in pairs {
                checked += 1;
                let scale = computed.abs().max(exact.abs());
                if scale > 0.0 {
                    worst = worst.max((computed - exact).abs() / scale);
                }
                if !rel_close(computed, exact, 1e-10) {
                    failures += 1;
                    details.push(format!("{model} n={n} {name}: computed {computed:e}, enumerated {exact:e}"));
                }
            }
        }
    }
    details.push(format!("{checked} comparisons, worst relative error {worst:.3e}"));
    Ok(failures == 0)
}

fn good_identity(details: &mut Vec<String>) -> Result<bool> {
    let mut ok = true;
    let mut worst = 0.0f64;
    for model in [FrequencyModel::zipf(2.0)?, FrequencyModel::geometric(0.5)?, FrequencyModel::uniform(100)?] {
        for n in [1u64, 10, 100, 1000] {
            let lhs = (n + 1) as f64 * expected_mass(&model, Setting::Binomial { n }, 0, 1e-13)?.value;
            let rhs = expected_occupancy(&model, Setting::Binomial { n: n + 1 }, 1, 1e-13)?.value;
            worst = worst.max((lhs - rhs).abs() / rhs.abs());
            if !rel_close(lhs, rhs, 1e-10) {
                ok = false;
                details.push(format!("{model} n={n}: {lhs:e} vs {rhs:e}"));
            }
        }
    }
    details.push(format!("worst relative error {worst:.3e}"));
    Ok(ok)
}

fn birthday(details: &mut Vec<String>) -> Result<bool> {
    let model = FrequencyModel::uniform(10_000)?;
    let ek = expected_coverage(&model, Setting::Poisson { t: 100.0 }, 1e-14)?.value;
    let var = var_coverage_poisson(&model, 100.0, 1e-14)?.value;
    let ek_ok = (99.5..=99.5 + 1.0 / 600.0).contains(&ek);
    let var_ok = (100.0 - 1.0 / 600.0..=100.0 + 1.0 / 1200.0).contains(&var);
    details.push(format!("E K(100) = {ek:.10} in [99.5, 99.5+1/600]: {ek_ok}"));
    details.push(format!("var K(100) = {var:.10} in [100-1/600, 100+1/1200]: {var_ok}"));
    Ok(ek_ok && var_ok)
}

fn sandwich_models() -> Result<Vec<FrequencyModel>> {
    Ok(vec![
        FrequencyModel::zipf(2.0)?,
        FrequencyModel::geometric(0.5)?,
        FrequencyModel::stretched_geometric(0.5)?,
        FrequencyModel::fast_variation(),
        FrequencyModel::uniform(100)?,
    ])
}

fn variance_sandwich(details: &mut Vec<String>) -> Result<bool> {
    let mut ok = true;
    for model in sandwich_models()? {
        for t in [1e2, 1e4] {
            let var = var_coverage_poisson(&model, t, DEFAULT_EPSILON)?.value;
            let lower = expected_occupancy(&model, Setting::Poisson { t: 2.0 * t }, 1, DEFAULT_EPSILON)?.value / 2.0;
            let upper = expected_occupancy(&model, Setting::Poisson { t }, 1, DEFAULT_EPSILON)?.value;
            let holds = lower <= var && var <= upper;
            ok &= holds;
            details.push(format!("{model} t={t}: {lower:.6e} <= {var:.6e} <= {upper:.6e}: {holds}"));
        }
    }
    Ok(ok)
}

fn missing_mass_variance(cfg: &AcceptanceConfig, details: &mut Vec<String>) -> Result<bool> {
    let mut ok = true;
    let t = 1e4;
    for model in [FrequencyModel::zipf(2.0)?, FrequencyModel::geometric(0.5)?] {
        let exact = var_missing_mass_poisson(&model, t, DEFAULT_EPSILON)?.formula.value;
        let rep = run_replicates(&model, Setting::Poisson { t }, cfg.replicates, cfg.seed)?;
        let m0 = rep.quantity("M_0").expect("tracked quantity");
        let (var, se) = (m0.variance.unwrap_or(f64::NAN), m0.variance_stderr.unwrap_or(f64::NAN));
        let holds = (var - exact).abs() <= 3.0 * se;
        ok &= holds;
        details.push(format!("{model}: formula {exact:.6e}, Monte Carlo {var:.6e} ± {se:.2e}: {holds}"));
    }
    Ok(ok)
}

const LAMBDA_GRID: [f64; 6] = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];

fn mgf_dominance(details: &mut Vec<String>) -> Result<bool> {
    let mut checked = 0;
    let mut violations = Vec::new();
    let mut record = |what: String, exact: f64, bound: f64| {
        checked += 1;
        if exact > bound + 1e-12 {
            violations.push(format!("{what}: exact {exact:.6e} > bound {bound:.6e}"));
        }
    };
    for model in small_models()? {
        let probs: Vec<f64> = (1..=model.support().unwrap_or(0)).map(|j| model.prob(j)).collect::<Result<_>>()?;
        for n in 1..=4u32 {
            let nf = n as f64;
            let e = Enumeration::binomial(&model, n)?;
            let setting = Setting::Binomial { n: n as u64 };
            let report = moment_report(&model, setting, n as u64 + 1, 1e-14)?;
            for r in 1..=n {
                let v = knrbar_variance_factor(&report, r as u64)?;
                for lambda in LAMBDA_GRID {
                    let exact = e.centered_log_mgf(|o| Enumeration::cumulative(o, r), lambda);
                    record(format!("{model} n={n} K_{r}bar λ={lambda}"), exact, knrbar_log_laplace(v, lambda));
                }
            }
            let proxies = variance_proxies(&model, n as u64, 1e-14)?;
            let (left, right) = missing_mass_bounds(&proxies, u64::MAX)?;
            for lambda in LAMBDA_GRID {
                let exact = e.centered_log_mgf(|o| e.mass(o, 0), lambda);
                if lambda < 0.0 {
                    record(format!("{model} n={n} M_0 left λ={lambda}"), exact, left.log_laplace(lambda)?);
                } else if lambda < nf {
                    let series = missing_mass_log_laplace_series(&model, n as u64, lambda, 1e-14)?;
                    record(format!("{model} n={n} M_0 series λ={lambda}"), exact, series.value);
                    record(format!("{model} n={n} M_0 right λ={lambda}"), exact, right.log_laplace(lambda)?);
                }
            }
            let t = nf;
            let (upper, lower) = gt_gap_bounds(&model, t, 1e-14)?;
            for lambda in LAMBDA_GRID {
                if lambda.abs() >= t {
                    continue;
                }
                let exact = poisson_gap_log_mgf(&probs, t, lambda);
                let bound = if lambda > 0.0 { upper.log_laplace(lambda)? } else { lower.log_laplace(-lambda)? };
                record(format!("{model} t={t} G_0-M_0 λ={lambda}"), exact, bound);
            }
        }
    }
    details.push(format!("{checked} (instance, λ) pairs checked, {} violations", violations.len()));
    let ok = violations.is_empty();
    details.extend(violations.into_iter().take(20));
    Ok(ok)
}

fn summarize_bounds(label: &str, report: &crate::mc::McReport, details: &mut Vec<String>) {
    for b in &report.bounds {
        details.push(format!(
            "{label} {} {:?} s={}: exceedance {:.4} vs bound {:.4} (+{:.4}) {:?}",
            b.quantity, b.side, b.s, b.empirical, b.bound, b.slack, b.verdict
        ));
    }
}

fn tail_domination(cfg: &AcceptanceConfig, details: &mut Vec<String>) -> Result<bool> {
    let n = 10_000u64;
    let zipf = FrequencyModel::zipf(2.0)?;
    let rz = check_tail_bounds(&zipf, Setting::Binomial { n }, cfg.replicates, cfg.seed, &DEFAULT_S_GRID, cfg.n0)?;
    summarize_bounds("zipf", &rz, details);
    let sg = FrequencyModel::stretched_geometric(0.5)?;
    let search = n0_search(&sg, &[100, 1000, 10_000], cfg.replicates, cfg.seed, &DEFAULT_S_GRID)?;
    details.push(format!("sqrtgeom n0 search {:?} -> n0 = {:?}", search.grid, search.n0));
    let n0 = search.n0.unwrap_or(cfg.n0);
    let rs = check_tail_bounds(&sg, Setting::Binomial { n }, cfg.replicates, cfg.seed, &DEFAULT_S_GRID, n0)?;
    summarize_bounds("sqrtgeom", &rs, details);
    let slow_checked = rs.bounds.iter().any(|b| b.anchor.contains("slow variation"));
    if !slow_checked {
        details.push("slow-variation bound not applicable at n = 10^4 with the searched n0".into());
    }
    Ok(rz.all_pass() && rs.all_pass() && slow_checked)
}

fn proxy_tightness(cfg: &AcceptanceConfig, details: &mut Vec<String>) -> Result<bool> {
    let n = 1_000_000u64;
    let model = FrequencyModel::zipf(2.0)?;
    let proxies = variance_proxies(&model, n, DEFAULT_EPSILON)?;
    let ratio = proxies.v_minus.value / proxies.v_plus.value;
    let masses = replicate_map(cfg.replicates, |i| -> Result<f64> {
        let p = draw(&model, Setting::Binomial { n }, cfg.seed, i)?;
        Ok(urn_core::sampler::true_mass(&model, &p, 0))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let var_mc = QuantityStats::from_values("M_0", &masses).variance.unwrap_or(f64::NAN);
    let target = 1.0 / (1.0 - 2f64.powf(-1.5));
    let tight = proxies.v_minus.value / var_mc;
    let a = (ratio - 0.25).abs() <= 0.05;
    let b = (tight / target - 1.0).abs() <= 0.25;
    details.push(format!("v-/v+ = {ratio:.5} (target 0.25 ± 0.05): {a}"));
    details.push(format!("v-/var_MC = {tight:.5} (target {target:.5} ± 25%): {b}"));
    Ok(a && b)
}

fn ci_coverage(cfg: &AcceptanceConfig, details: &mut Vec<String>) -> Result<bool> {
    let res = check_ci_coverage(&FrequencyModel::zipf(2.0)?, 1e4, 0.025, cfg.replicates, cfg.seed)?;
    details.push(format!(
        "coverage {:.4} vs target {:.2} − 3·{:.4}; clipped in {:.4} of replicates",
        res.coverage, res.target, res.stderr, res.clipped_fraction
    ));
    Ok(res.verdict == Verdict::Pass)
}

fn ratio_clt(cfg: &AcceptanceConfig, details: &mut Vec<String>) -> Result<bool> {
    let res = check_clt(&FrequencyModel::zipf(2.0)?, 1e6, cfg.replicates, cfg.seed)?;
    if let Some(ks) = res.ks {
        details.push(format!("KS statistic {:.5}, p-value {:.4}, {} replicates used", ks.statistic, ks.p_value, ks.sample_size));
    }
    Ok(res.verdict == Verdict::Pass)
}

fn karlin(details: &mut Vec<String>) -> Result<bool> {
    let n = 1_000_000u64;
    let mut ok = true;
    let mut judge = |label: &str, report: &crate::experiments::AsymptoticsReport, rows: &[(&str, Option<u64>)], tol: f64| {
        for &(q, r) in rows {
            if let Some(row) = report.row(n, q, r) {
                let holds = (row.ratio - 1.0).abs() <= tol;
                ok &= holds;
                let level = r.map_or(String::new(), |r| format!(" r={r}"));
                details.push(format!("{label} {q}{level}: exact {:.6e}, predicted {:.6e}, ratio {:.4} (±{tol}): {holds}", row.exact, row.predicted, row.ratio));
            } else {
                ok = false;
            }
        }
    };
    let standard = [("EK", None), ("EK_r", Some(1)), ("EK_r", Some(2)), ("EKbar_r", Some(2))];
    let zipf = experiment_asymptotics(&FrequencyModel::zipf(2.0)?, &[n], &[1, 2], 0, false)?;
    judge("zipf", &zipf, &standard, 0.05);
    let fast = experiment_asymptotics(&FrequencyModel::fast_variation(), &[n], &[1, 2], 0, false)?;
    judge("fastvar", &fast, &standard, 0.15);
    let slow = experiment_asymptotics(&FrequencyModel::stretched_geometric(0.5)?, &[n], &[1, 2, 3], 0, false)?;
    judge("sqrtgeom", &slow, &[("EK_r", Some(1)), ("EK_r", Some(2)), ("EK_r", Some(3))], 0.20);
    Ok(ok)
}

fn index_and_species(cfg: &AcceptanceConfig, details: &mut Vec<String>) -> Result<bool> {
    let n = 1_000_000u64;
    let model = FrequencyModel::zipf(2.0)?;
    let setting = Setting::Binomial { n };
    let single = draw(&model, setting, cfg.seed, 0)?;
    let a1 = alpha_hat(&single, 1).unwrap_or(f64::NAN);
    let a_ok = (a1 - 0.5).abs() < 0.05;
    details.push(format!("K_1/K = {a1:.4} (target 0.5 ± 0.05): {a_ok}"));
    let pairs = replicate_map(100, |i| -> Result<(f64, f64)> {
        let a = draw(&model, setting, cfg.seed.wrapping_add(1), 2 * i)?;
        let b = draw(&model, setting, cfg.seed.wrapping_add(1), 2 * i + 1)?;
        let doubled = a.concat(&b)?;
        let alpha = alpha_hat(&a, 1).unwrap_or(f64::NAN);
        let forecast = species_estimate(&a, 2.0, SpeciesBasis::Level(1), SpeciesRegime::PowerLaw { alpha_hat: alpha })?;
        Ok((forecast, doubled.distinct() as f64 - a.distinct() as f64))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let forecast = pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64;
    let realized = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64;
    let s_ok = (forecast / realized - 1.0).abs() < 0.10;
    details.push(format!("mean forecast {forecast:.2} vs mean realized K_2n − K_n {realized:.2} (±10%): {s_ok}"));
    Ok(a_ok && s_ok)
}

fn light_tail(cfg: &AcceptanceConfig, details: &mut Vec<String>) -> Result<bool> {
    let grid = [1_000u64, 10_000, 100_000];
    let rep = experiment_lighttail(0.05, &grid, 1.0, 100_000, cfg.replicates, cfg.seed)?;
    for row in &rep.blind_spot {
        details.push(format!("geom:q=0.05 n={}: G=0 and M>0 in {} of {} replicates", row.n, row.count, rep.replicates));
    }
    for row in &rep.max_gap {
        details.push(format!("geom:q=0.05 n={}: E[max − K] = {:.3} ± {:.3}, upper {:.1}: {:?}", row.n, row.mean_gap, row.stderr, row.upper, row.verdict));
    }
    details.push(format!("{} n={}: two-point mass {:.4} (needs >= 0.95)", rep.two_point.model, rep.two_point.n, rep.two_point.two_point_mass));
    let contrast = experiment_lighttail(0.95, &grid, 1.0, 1_000, cfg.replicates.min(2_000), cfg.seed)?;
    for row in &contrast.blind_spot {
        details.push(format!("informational, decay ratio 0.05 (geom:q=0.95) n={}: G=0 and M>0 frequency {:.4}", row.n, row.frequency));
    }
    let gaps_ok = rep.max_gap.iter().all(|r| r.verdict == Verdict::Pass);
    Ok(rep.blind_spot_observed() && rep.two_point.verdict == Verdict::Pass && gaps_ok)
}

fn determinism(cfg: &AcceptanceConfig, details: &mut Vec<String>) -> Result<bool> {
    let replicates = cfg.replicates.min(2_000);
    let model = FrequencyModel::zipf(2.0)?;
    let run = |threads: usize| -> Result<String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        pool.install(|| {
            let a = check_tail_bounds(&model, Setting::Binomial { n: 10_000 }, replicates, cfg.seed, &DEFAULT_S_GRID, cfg.n0)?;
            let b = run_replicates(&model, Setting::Poisson { t: 1e4 }, replicates, cfg.seed)?;
            let c = check_ci_coverage(&model, 1e4, 0.025, replicates, cfg.seed)?;
            Ok(serde_json::to_string(&(a, b, c)).expect("reports serialize"))
        })
    };
    let first = run(1)?;
    let again = run(1)?;
    let wide = run(4)?;
    let same = first == again && first == wide;
    details.push(format!("{} bytes of report JSON; identical across re-run and 1 vs 4 workers: {same}", first.len()));
    Ok(same)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format() {
        let o = CriterionOutcome { id: 3, title: "x".into(), verdict: Verdict::Pass, details: vec![] };
        assert_eq!(o.line(), "criterion 03 PASS: x");
    }

    #[test]
    fn small_models_are_small() {
        for m in small_models().unwrap() {
            assert!(m.support().unwrap() <= 4);
        }
    }
}
