//! `urnlab`: moments, sampling, estimation and verification runs for the
//! infinite urn scheme.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Format, RunConfig};
use urn_core::UrnError;

/// Accepted model specifications.
pub const MODEL_GRAMMAR: &str = "uniform:k=100 | zipf:s=2.0 | geom:q=0.5 | sqrtgeom:q=0.5 | fastvar | poisson:lambda=1 | explicit:@file.csv | explicit:0.5,0.3,0.2";

const EXPERIMENTS_HELP: &str = "\
Experiments (verify --experiment NAME, or experiment NAME):
  replicates   Monte Carlo moments of K_n, K_{n,r}, M_{n,0}, G_{n,0} [anchor: occupancy moments]
  tail-bounds  empirical exceedance against sub-gamma tail bounds [anchor: concentration of K_{n,r}, M_{n,0}, G_{n,0}-M_{n,0}]
  n0-search    smallest n from which the slow-variation bound holds [anchor: slow-variation missing-mass bound]
  coverage     Good-Turing interval coverage in the Poisson setting [anchor: missing-mass confidence interval]
  clt          KS test of the standardized ratio G_0/M_0 - 1 [anchor: ratio central limit theorem]
  lighttail    geometric max-index gap, G=0<M blind spot, two-point missing mass [anchor: light-tailed pathologies]
  asymptotics  exact moments against regular-variation equivalents [anchor: regular-variation equivalents]

Suites (verify --suite NAME):
  acceptance   all fourteen acceptance criteria, one PASS/FAIL line each [anchor: acceptance suite]

Model grammar: uniform:k=100 | zipf:s=2.0 | geom:q=0.5 | sqrtgeom:q=0.5 | fastvar | poisson:lambda=1 | explicit:@file.csv

Seed precedence: --seed > URNLAB_SEED > config file > 0.";

#[derive(Debug, Parser)]
#[command(name = "urnlab", version, about = "Infinite urn scheme moments, bounds, estimators and Monte Carlo checks", after_help = EXPERIMENTS_HELP)]
struct Cli {
    /// JSON file mirroring the flags, or a previously emitted JSON report.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, env = "URNLAB_SEED")]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Report encoding (default: json).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certified expected occupancy counts, masses and variance proxies.
    Moments {
        #[command(flatten)]
        model: ModelArgs,
        /// Largest occupancy level reported.
        #[arg(long)]
        rmax: Option<u64>,
        /// Relative tolerance of the certified sums.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Draws one occupancy profile.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Good-Turing estimates, index estimates, species forecasts and the
    /// missing-mass interval for a profile file.
    Estimate {
        /// Profile as JSON or as `j,count` CSV.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Poisson intensity for the interval.
        #[arg(long)]
        t: Option<f64>,
        /// Emit the missing-mass interval (requires --delta).
        #[arg(long)]
        ci: bool,
        /// Failure budget per tail event.
        #[arg(long)]
        delta: Option<f64>,
        /// Growth factor of the species forecast.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Runs a suite or experiment; the exit code is 1 if any required check fails.
    Verify {
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        #[arg(long, value_enum)]
        experiment: Option<Experiment>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Runs an experiment and reports it without an exit-code verdict.
    Experiment {
        #[arg(value_enum)]
        name: Experiment,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Frequency model, e.g. zipf:s=2.
    #[arg(long)]
    model: Option<String>,
    /// Sample size of the binomial setting.
    #[arg(long)]
    n: Option<u64>,
    /// Intensity of the Poisson setting.
    #[arg(long)]
    t: Option<f64>,
    /// Use the Poisson setting (with --n, the intensity is n).
    #[arg(long)]
    poisson: bool,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Monte Carlo replicates (default 10000).
    #[arg(long)]
    replicates: Option<usize>,
    /// Exponents s of the tail checks.
    #[arg(long, value_delimiter = ',')]
    s_grid: Option<Vec<f64>>,
    /// Sample sizes of grid experiments.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<u64>>,
    /// Occupancy levels of the asymptotics table.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<u64>>,
    /// Geometric parameter of the light-tail experiment.
    #[arg(long)]
    q: Option<f64>,
    /// Poisson pmf parameter of the two-point check.
    #[arg(long)]
    lambda: Option<f64>,
    /// Sample size of the two-point check.
    #[arg(long)]
    two_point_n: Option<u64>,
    /// Sample size from which the slow-variation bound is applied.
    #[arg(long)]
    n0: Option<u64>,
    /// Failure budget of the coverage experiment.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Acceptance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Replicates,
    TailBounds,
    N0Search,
    Coverage,
    Clt,
    Lighttail,
    Asymptotics,
}

/// Failure of a run, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or input; exit code 2.
    Usage(String),
    /// Unparseable model specification; exit code 2.
    Model(UrnError),
    /// Evaluation error; exit code 1.
    Runtime(UrnError),
    Io(String),
    /// A required check failed; exit code 1.
    Failed(String),
}

impl From<UrnError> for CliError {
    fn from(e: UrnError) -> Self {
        CliError::Runtime(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Model(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }

    fn report(&self) {
        match self {
            CliError::Usage(msg) => eprintln!("error: {msg}"),
            CliError::Model(e) => eprintln!("error: {e}\nmodel grammar: {MODEL_GRAMMAR}"),
            CliError::Runtime(e) => eprintln!("error: {e}"),
            CliError::Io(msg) => eprintln!("error: {msg}"),
            CliError::Failed(msg) => eprintln!("{msg}"),
        }
    }
}

fn flags(cli: &Cli) -> RunConfig {
    let mut cfg = RunConfig { seed: cli.seed, output: cli.output.clone(), format: cli.format, ..Default::default() };
    let set_model = |cfg: &mut RunConfig, m: &ModelArgs| {
        cfg.model = m.model.clone();
        cfg.n = m.n;
        cfg.t = m.t;
        cfg.poisson = m.poisson.then_some(true);
    };
    let set_exp = |cfg: &mut RunConfig, e: &ExperimentArgs| {
        cfg.replicates = e.replicates;
        cfg.s_grid = e.s_grid.clone();
        cfg.n_grid = e.n_grid.clone();
        cfg.levels = e.levels.clone();
        cfg.q = e.q;
        cfg.lambda = e.lambda;
        cfg.two_point_n = e.two_point_n;
        cfg.n0 = e.n0;
        cfg.delta = e.delta;
    };
    match &cli.command {
        Command::Moments { model, rmax, epsilon } => {
            cfg.command = Some("moments".into());
            set_model(&mut cfg, model);
            cfg.rmax = *rmax;
            cfg.epsilon = *epsilon;
        }
        Command::Sample { model } => {
            cfg.command = Some("sample".into());
            set_model(&mut cfg, model);
        }
        Command::Estimate { profile, t, ci, delta, tau } => {
            cfg.command = Some("estimate".into());
            cfg.profile = profile.clone();
            cfg.t = *t;
            cfg.ci = ci.then_some(true);
            cfg.delta = *delta;
            cfg.tau = *tau;
        }
        Command::Verify { suite, experiment, model, exp } => {
            cfg.command = Some("verify".into());
            cfg.suite = suite.map(|s| value_name(&s));
            cfg.experiment = experiment.map(|e| value_name(&e));
            set_model(&mut cfg, model);
            set_exp(&mut cfg, exp);
        }
        Command::Experiment { name, model, exp } => {
            cfg.command = Some("experiment".into());
            cfg.experiment = Some(value_name(name));
            set_model(&mut cfg, model);
            set_exp(&mut cfg, exp);
        }
    }
    cfg
}

fn value_name(v: &impl ValueEnum) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    }
    let mut cfg = flags(&cli);
    if let Some(path) = &cli.config {
        let file = RunConfig::load(path)?;
        if file.command.as_ref().is_some_and(|c| Some(c) != cfg.command.as_ref()) {
            return Err(CliError::Usage(format!(
                "config was recorded for `{}`, not `{}`",
                file.command.unwrap_or_default(),
                cfg.command.unwrap_or_default()
            )));
        }
        cfg = cfg.or(file);
    }
    cfg.seed = Some(cfg.seed.unwrap_or(0));
    match cli.command {
        Command::Moments { .. } => commands::moments(cfg),
        Command::Sample { .. } => commands::sample(cfg),
        Command::Estimate { .. } => commands::estimate(cfg),
        Command::Verify { .. } => commands::verify(cfg, true),
        Command::Experiment { .. } => commands::verify(cfg, false),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            e.report();
            ExitCode::from(e.exit_code())
        }
    }
}
