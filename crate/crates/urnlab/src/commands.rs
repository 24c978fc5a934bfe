//! Subcommand implementations.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::Serialize;

use urn_core::estimators::{alpha_hat, good_turing, gt_ci_poisson, species_estimate, EstimateWithCI, SpeciesBasis, SpeciesRegime};
use urn_core::moments::{
    expected_cumulative, expected_occupancy, moment_report, var_coverage_poisson, var_missing_mass_poisson, variance_proxies,
    Certified, ReportRow, Setting, DEFAULT_EPSILON,
};
use urn_core::sampler::{sample_binomial, sample_poisson, OccupancyProfile, ProfileSetting};
use urn_core::{FrequencyModel, UrnError};
use urn_harness::experiments::{experiment_asymptotics, experiment_lighttail};
use urn_harness::mc::{check_ci_coverage, check_clt, check_tail_bounds, n0_search, run_replicates, DEFAULT_S_GRID};
use urn_harness::{run_criterion, AcceptanceConfig, CriterionOutcome, Verdict};

use crate::config::RunConfig;
use crate::output::{emit, num, opt_int, opt_num, Table};
use crate::{CliError, Experiment, Suite};

const DEFAULT_RMAX: u64 = 5;
const DEFAULT_REPLICATES: usize = 10_000;
const DEFAULT_DELTA: f64 = 0.025;
const DEFAULT_TAU: f64 = 2.0;
const DEFAULT_N0: u64 = urn_core::bounds::DEFAULT_N0;

fn parse_model(cfg: &RunConfig) -> Result<FrequencyModel, CliError> {
    let spec = cfg.model.as_deref().ok_or_else(|| CliError::Usage("missing --model".into()))?;
    spec.parse().map_err(|e| match e {
        UrnError::UnknownFamily(_) | UrnError::MalformedSpec { .. } | UrnError::InvalidParameter(_) | UrnError::Io(_) => CliError::Model(e),
        other => CliError::Runtime(other),
    })
}

fn setting(cfg: &RunConfig) -> Result<Setting, CliError> {
    match (cfg.n, cfg.t, cfg.poisson.unwrap_or(false)) {
        (Some(_), Some(_), _) => Err(CliError::Usage("give either --n or --t, not both".into())),
        (Some(n), None, false) => Ok(Setting::Binomial { n }),
        (Some(n), None, true) => Ok(Setting::Poisson { t: n as f64 }),
        (None, Some(t), _) if t >= 0.0 && t.is_finite() => Ok(Setting::Poisson { t }),
        (None, Some(t), _) => Err(CliError::Usage(format!("--t must be finite and non-negative, got {t}"))),
        (None, None, _) => Err(CliError::Usage("missing --n (binomial) or --t (Poisson)".into())),
    }
}

fn seed(cfg: &RunConfig) -> u64 {
    cfg.seed.unwrap_or(0)
}

fn row_table(rows: &[ReportRow]) -> Table {
    let mut table = Table::new(&["quantity", "r", "value", "error_bound"]);
    for row in rows {
        table.push(vec![row.quantity.clone(), opt_int(row.r), num(row.value), num(row.error_bound)]);
    }
    table
}

/// Exact Poisson variances and proxies at intensity `t`.
#[derive(Debug, Serialize)]
struct PoissonVariances {
    t: f64,
    var_k: Certified,
    var_m0: Certified,
    v_minus: Certified,
    v_plus: Certified,
}

impl PoissonVariances {
    fn rows(&self) -> Vec<ReportRow> {
        [("var_K", self.var_k), ("var_M0", self.var_m0), ("v_minus", self.v_minus), ("v_plus", self.v_plus)]
            .into_iter()
            .map(|(q, c)| ReportRow { quantity: q.into(), r: None, value: c.value, error_bound: c.error })
            .collect()
    }
}

fn scaled(c: Certified, k: f64) -> Certified {
    Certified { value: c.value * k, error: c.error * k }
}

pub fn moments(mut cfg: RunConfig) -> Result<(), CliError> {
    let model = parse_model(&cfg)?;
    let setting = setting(&cfg)?;
    let rmax = *cfg.rmax.get_or_insert(DEFAULT_RMAX);
    let eps = *cfg.epsilon.get_or_insert(DEFAULT_EPSILON);
    let report = moment_report(&model, setting, rmax, eps)?;
    let mut rows = report.rows();
    let variance = match setting {
        Setting::Binomial { n } => {
            let v = variance_proxies(&model, n, eps)?;
            rows.extend(v.rows());
            serde_json::to_value(v)
        }
        Setting::Poisson { t } => {
            let v = PoissonVariances {
                t,
                var_k: var_coverage_poisson(&model, t, eps)?,
                var_m0: var_missing_mass_poisson(&model, t, eps)?.direct,
                v_minus: scaled(expected_occupancy(&model, setting, 2, eps)?, 2.0 / (t * t)),
                v_plus: scaled(expected_cumulative(&model, setting, 2, eps)?, 2.0 / (t * t)),
            };
            rows.extend(v.rows());
            serde_json::to_value(v)
        }
    }
    .map_err(|e| CliError::Io(e.to_string()))?;
    let json = serde_json::json!({ "model": model.to_string(), "moments": report, "variance": variance });
    emit(&cfg, &json, &row_table(&rows))
}

pub fn sample(cfg: RunConfig) -> Result<(), CliError> {
    let model = parse_model(&cfg)?;
    let profile = match setting(&cfg)? {
        Setting::Binomial { n } => sample_binomial(&model, n, seed(&cfg)),
        Setting::Poisson { t } => sample_poisson(&model, t, seed(&cfg))?,
    };
    let mut table = Table::new(&["j", "count"]);
    for (j, c) in profile.counts() {
        table.push(vec![j.to_string(), c.to_string()]);
    }
    emit(&cfg, &profile, &table)
}

fn read_profile(path: &Path) -> Result<OccupancyProfile, CliError> {
    let bad = |e: &dyn std::fmt::Display| CliError::Usage(format!("profile {}: {e}", path.display()));
    let file = File::open(path).map_err(|e| bad(&e))?;
    if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("json")) {
        let mut value: serde_json::Value = serde_json::from_reader(BufReader::new(file)).map_err(|e| bad(&e))?;
        if let Some(report) = value.get_mut("report") {
            value = report.take();
        }
        serde_json::from_value(value).map_err(|e| bad(&e))
    } else {
        OccupancyProfile::read_csv(BufReader::new(file)).map_err(|e| bad(&e))
    }
}

#[derive(Debug, Serialize)]
struct LevelValue {
    r: u64,
    value: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Forecast {
    basis: SpeciesBasis,
    regime: &'static str,
    alpha_hat: Option<f64>,
    tau: f64,
    new_species: Option<f64>,
    note: Option<String>,
}

#[derive(Debug, Serialize)]
struct EstimateReport {
    setting: ProfileSetting,
    n: u64,
    distinct: u64,
    good_turing: Vec<LevelValue>,
    alpha_hat: Vec<LevelValue>,
    species: Vec<Forecast>,
    interval: Option<EstimateWithCI>,
}

fn forecast(profile: &OccupancyProfile, tau: f64, basis: SpeciesBasis, alpha: Option<f64>) -> Forecast {
    let (regime, result) = match alpha {
        Some(a) => ("power_law", species_estimate(profile, tau, basis, SpeciesRegime::PowerLaw { alpha_hat: a })),
        None => ("slow_variation", species_estimate(profile, tau, basis, SpeciesRegime::SlowVariation)),
    };
    let (new_species, note) = match result {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Forecast { basis, regime, alpha_hat: alpha, tau, new_species, note }
}

pub fn estimate(mut cfg: RunConfig) -> Result<(), CliError> {
    let path = cfg.profile.clone().ok_or_else(|| CliError::Usage("missing --profile".into()))?;
    let profile = read_profile(&path)?;
    let want_ci = cfg.ci.unwrap_or(false);
    if want_ci && cfg.delta.is_none() {
        return Err(CliError::Usage("--ci requires --delta".into()));
    }
    let tau = *cfg.tau.get_or_insert(DEFAULT_TAU);
    let good = (0..=3)
        .map(|r| Ok(LevelValue { r, value: (profile.n() > 0).then(|| good_turing(&profile, r)).transpose()? }))
        .collect::<Result<Vec<_>, UrnError>>()?;
    let alphas: Vec<LevelValue> = (1..=3).map(|r| LevelValue { r, value: alpha_hat(&profile, r) }).collect();
    let a1 = alphas[0].value;
    let species = vec![
        forecast(&profile, tau, SpeciesBasis::Level(1), a1),
        forecast(&profile, tau, SpeciesBasis::Distinct, a1),
        forecast(&profile, tau, SpeciesBasis::Level(1), None),
    ];
    let recorded_t = match profile.setting() {
        ProfileSetting::Poisson { t, .. } => Some(t),
        ProfileSetting::Binomial { .. } => None,
    };
    let interval = if want_ci || cfg.t.is_some() {
        let t = cfg.t.or(recorded_t).ok_or_else(|| CliError::Usage("--ci on a binomial profile requires --t".into()))?;
        let delta = *cfg.delta.get_or_insert(DEFAULT_DELTA);
        Some(gt_ci_poisson(&profile, t, delta)?)
    } else {
        None
    };
    let report = EstimateReport {
        setting: profile.setting(),
        n: profile.n(),
        distinct: profile.distinct(),
        good_turing: good,
        alpha_hat: alphas,
        species,
        interval,
    };
    let mut table = Table::new(&["quantity", "r", "value", "lower", "upper"]);
    for g in &report.good_turing {
        table.push(vec!["G".into(), g.r.to_string(), opt_num(g.value), String::new(), String::new()]);
    }
    for a in &report.alpha_hat {
        table.push(vec!["alpha_hat".into(), a.r.to_string(), opt_num(a.value), String::new(), String::new()]);
    }
    for f in &report.species {
        let (name, r) = match f.basis {
            SpeciesBasis::Distinct => (format!("new_species_{}_distinct", f.regime), String::new()),
            SpeciesBasis::Level(r) => (format!("new_species_{}", f.regime), r.to_string()),
        };
        table.push(vec![name, r, opt_num(f.new_species), String::new(), String::new()]);
    }
    if let Some(ci) = &report.interval {
        table.push(vec!["missing_mass_interval".into(), "0".into(), num(ci.point), num(ci.lower), num(ci.upper)]);
    }
    emit(&cfg, &report, &table)
}

fn verdict_name(v: Verdict) -> String {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Skip => "SKIP",
    }
    .into()
}

/// Runs a suite or an experiment; with `enforce`, any failed required check
/// makes the run fail after the report is written.
pub fn verify(mut cfg: RunConfig, enforce: bool) -> Result<(), CliError> {
    let suite = cfg.suite.as_deref().map(|s| <Suite as clap::ValueEnum>::from_str(s, true)).transpose().map_err(CliError::Usage)?;
    let experiment = cfg
        .experiment
        .as_deref()
        .map(|s| <Experiment as clap::ValueEnum>::from_str(s, true))
        .transpose()
        .map_err(CliError::Usage)?;
    let failed = match (suite, experiment) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --suite or --experiment, not both".into())),
        (None, None) => return Err(CliError::Usage("missing --suite or --experiment".into())),
        (Some(Suite::Acceptance), None) => acceptance(&mut cfg)?,
        (None, Some(e)) => run_experiment(&mut cfg, e)?,
    };
    match failed {
        Some(what) if enforce => Err(CliError::Failed(format!("FAIL: {what}"))),
        _ => Ok(()),
    }
}

fn acceptance(cfg: &mut RunConfig) -> Result<Option<String>, CliError> {
    let acfg = AcceptanceConfig {
        seed: seed(cfg),
        replicates: *cfg.replicates.get_or_insert(DEFAULT_REPLICATES),
        n0: *cfg.n0.get_or_insert(DEFAULT_N0),
    };
    let outcomes: Vec<CriterionOutcome> = (1..=urn_harness::acceptance::CRITERIA)
        .map(|id| {
            let outcome = run_criterion(id, &acfg);
            eprintln!("{}", outcome.line());
            outcome
        })
        .collect();
    let mut table = Table::new(&["criterion", "verdict", "title", "details"]);
    for o in &outcomes {
        table.push(vec![o.id.to_string(), verdict_name(o.verdict), o.title.clone(), o.details.join("; ")]);
    }
    emit(cfg, &outcomes, &table)?;
    let failed: Vec<String> = outcomes.iter().filter(|o| o.verdict.is_fail()).map(|o| format!("{:02}", o.id)).collect();
    Ok((!failed.is_empty()).then(|| format!("acceptance criteria {}", failed.join(", "))))
}

fn run_experiment(cfg: &mut RunConfig, experiment: Experiment) -> Result<Option<String>, CliError> {
    let seed = seed(cfg);
    let replicates = *cfg.replicates.get_or_insert(DEFAULT_REPLICATES);
    match experiment {
        Experiment::Replicates => {
            let model = parse_model(cfg)?;
            let report = run_replicates(&model, setting(cfg)?, replicates, seed)?;
            let mut table = Table::new(&["quantity", "mean", "variance", "stderr"]);
            for q in &report.quantities {
                table.push(vec![q.name.clone(), num(q.mean), opt_num(q.variance), opt_num(q.stderr)]);
            }
            emit(cfg, &report, &table)?;
            Ok(None)
        }
        Experiment::TailBounds => {
            let model = parse_model(cfg)?;
            let s_grid = cfg.s_grid.get_or_insert_with(|| DEFAULT_S_GRID.to_vec()).clone();
            let n0 = *cfg.n0.get_or_insert(DEFAULT_N0);
            let report = check_tail_bounds(&model, setting(cfg)?, replicates, seed, &s_grid, n0)?;
            let mut table = Table::new(&["quantity", "side", "anchor", "s", "radius", "empirical", "bound", "slack", "verdict"]);
            for b in &report.bounds {
                table.push(vec![
                    b.quantity.clone(),
                    format!("{:?}", b.side).to_lowercase(),
                    b.anchor.clone(),
                    num(b.s),
                    num(b.radius),
                    num(b.empirical),
                    num(b.bound),
                    num(b.slack),
                    verdict_name(b.verdict),
                ]);
            }
            emit(cfg, &report, &table)?;
            Ok((!report.all_pass()).then(|| "tail-bound check".into()))
        }
        Experiment::N0Search => {
            let model = parse_model(cfg)?;
            let n_grid = cfg.n_grid.get_or_insert_with(|| vec![100, 1_000, 10_000]).clone();
            let s_grid = cfg.s_grid.get_or_insert_with(|| DEFAULT_S_GRID.to_vec()).clone();
            let search = n0_search(&model, &n_grid, replicates, seed, &s_grid)?;
            let mut table = Table::new(&["n", "pass", "n0"]);
            for (n, ok) in &search.grid {
                table.push(vec![n.to_string(), ok.to_string(), opt_int(search.n0)]);
            }
            emit(cfg, &search, &table)?;
            Ok(search.n0.is_none().then(|| "no n0 on the grid".into()))
        }
        Experiment::Coverage => {
            let model = parse_model(cfg)?;
            let t = *cfg.t.get_or_insert(1e4);
            let delta = *cfg.delta.get_or_insert(DEFAULT_DELTA);
            let res = check_ci_coverage(&model, t, delta, replicates, seed)?;
            let mut table = Table::new(&["t", "delta", "target", "coverage", "stderr", "clipped_fraction", "verdict"]);
            table.push(vec![
                num(res.t),
                num(res.delta),
                num(res.target),
                num(res.coverage),
                num(res.stderr),
                num(res.clipped_fraction),
                verdict_name(res.verdict),
            ]);
            emit(cfg, &res, &table)?;
            Ok(res.verdict.is_fail().then(|| "interval coverage".into()))
        }
        Experiment::Clt => {
            let model = parse_model(cfg)?;
            let t = *cfg.t.get_or_insert(1e6);
            let res = check_clt(&model, t, replicates, seed)?;
            let mut table = Table::new(&["t", "normalizer", "dropped", "ks_statistic", "p_value", "verdict"]);
            table.push(vec![
                num(res.t),
                opt_num(res.normalizer),
                res.dropped.to_string(),
                opt_num(res.ks.map(|k| k.statistic)),
                opt_num(res.ks.map(|k| k.p_value)),
                verdict_name(res.verdict),
            ]);
            emit(cfg, &res, &table)?;
            Ok(res.verdict.is_fail().then(|| "ratio CLT".into()))
        }
        Experiment::Lighttail => {
            let q = *cfg.q.get_or_insert(0.05);
            let n_grid = cfg.n_grid.get_or_insert_with(|| vec![1_000, 10_000, 100_000]).clone();
            let lambda = *cfg.lambda.get_or_insert(1.0);
            let two_point_n = *cfg.two_point_n.get_or_insert(100_000);
            let rep = experiment_lighttail(q, &n_grid, lambda, two_point_n, replicates, seed)?;
            let mut table = Table::new(&["check", "n", "value", "reference", "verdict"]);
            for row in &rep.max_gap {
                table.push(vec!["max_gap".into(), row.n.to_string(), num(row.mean_gap), num(row.upper), verdict_name(row.verdict)]);
            }
            for row in &rep.blind_spot {
                table.push(vec!["blind_spot_frequency".into(), row.n.to_string(), num(row.frequency), String::new(), String::new()]);
            }
            let tp = &rep.two_point;
            table.push(vec!["two_point_mass".into(), tp.n.to_string(), num(tp.two_point_mass), num(0.95), verdict_name(tp.verdict)]);
            emit(cfg, &rep, &table)?;
            let mut failed = Vec::new();
            if rep.max_gap.iter().any(|r| r.verdict.is_fail()) {
                failed.push("max-gap bound");
            }
            if !rep.blind_spot_observed() {
                failed.push("blind spot never observed");
            }
            if tp.verdict.is_fail() {
                failed.push("two-point concentration");
            }
            Ok((!failed.is_empty()).then(|| failed.join(", ")))
        }
        Experiment::Asymptotics => {
            let model = parse_model(cfg)?;
            let n_grid = cfg.n_grid.get_or_insert_with(|| vec![10_000, 100_000, 1_000_000]).clone();
            let levels = cfg.levels.get_or_insert_with(|| vec![1, 2, 3]).clone();
            let rep = experiment_asymptotics(&model, &n_grid, &levels, seed, true)?;
            let mut table = Table::new(&["n", "quantity", "r", "exact", "predicted", "ratio", "realized"]);
            for row in &rep.rows {
                table.push(vec![
                    row.n.to_string(),
                    row.quantity.clone(),
                    opt_int(row.r),
                    num(row.exact),
                    num(row.predicted),
                    num(row.ratio),
                    opt_num(row.realized),
                ]);
            }
            emit(cfg, &rep, &table)?;
            Ok(None)
        }
    }
}
