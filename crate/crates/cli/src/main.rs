use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use spdenoise::estimator::{estimate_with, EstimatorOptions};
use spdenoise::harness::{emit_outputs, run_experiment, worker_pool, ExperimentConfig, GridRule};
use spdenoise::hellinger::{minimax_report, HellingerReport};
use spdenoise::information::{nonparametric_rate, rate_report};
use spdenoise::oracle::standard_suite;
use spdenoise::simulator::{read_binary, simulate_with, write_binary, write_csv, SimulationOptions};
use spdenoise::spectral::{ModelSpec, SpectralModel};

/// Exit status when an oracle check fails.
const ORACLE_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "spdenoise", version, about = "Simulate, estimate and bound drift parameters of noisily observed linear SPDEs")]
struct Cli {
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, global = true, env = "WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one observation record.
    Simulate(SimulateArgs),
    /// Estimate the drift scale from a stored record.
    Estimate(EstimateArgs),
    /// Information, lower-bound rate and closed-form rate of a model.
    Rate(RateArgs),
    /// Hellinger bound between two parameter values or two scalar laws.
    Hellinger(HellingerArgs),
    /// Monte Carlo sweep with a log-log slope fit.
    Experiment(ExperimentArgs),
    /// Run the numerical operator checks.
    OracleCheck,
}

#[derive(Args)]
struct SimulateArgs {
    /// Model description (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    theta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, conflicts_with = "n_steps")]
    dt: Option<f64>,
    #[arg(long)]
    n_steps: Option<usize>,
    /// Binary record output.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV copy of the increments.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Keep the state paths in the record.
    #[arg(long)]
    retain_state: bool,
}

#[derive(Args)]
struct EstimateArgs {
    /// Binary record written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    /// Model to estimate with; defaults to the model stored in the record.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Estimator options (TOML).
    #[arg(long)]
    options: Option<PathBuf>,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    theta: Option<f64>,
    /// Also report the nonparametric rate at this smoothness.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct HellingerArgs {
    #[arg(long, requires_all = ["theta0", "theta1"])]
    config: Option<PathBuf>,
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long)]
    theta1: Option<f64>,
    #[arg(long, requires = "sigma1", conflicts_with = "config")]
    sigma0: Option<f64>,
    #[arg(long)]
    sigma1: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the CSV output path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Overrides the plot output path.
    #[arg(long)]
    plot: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<spdenoise::Error>() {
                Some(spdenoise::Error::DegenerateExcess(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let pool = worker_pool(cli.workers)?;
    match cli.command {
        Command::Experiment(args) => experiment(args, cli.workers),
        command => pool.install(|| dispatch(command)),
    }
}

fn dispatch(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Estimate(args) => estimate(args),
        Command::Rate(args) => rate(args),
        Command::Hellinger(args) => hellinger(args),
        Command::OracleCheck => oracle_check(),
        Command::Experiment(_) => unreachable!("handled by run"),
    }
}

fn load_model(path: &PathBuf) -> anyhow::Result<SpectralModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ModelSpec::from_toml(&text)?.build()?)
}

fn print_toml<T: Serialize>(value: &T) -> anyhow::Result<()> {
    print!("{}", toml::to_string(value)?);
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary {
    out: PathBuf,
    seed: String,
    rng_algo: String,
    n_modes: usize,
    n_steps: usize,
    dt: f64,
    states_retained: bool,
}

fn simulate(args: SimulateArgs) -> anyhow::Result<u8> {
    let model = Arc::new(load_model(&args.config)?);
    let rule = match (args.dt, args.n_steps) {
        (Some(dt), _) => GridRule::Dt { dt },
        (None, Some(n_steps)) => GridRule::NSteps { n_steps },
        (None, None) => GridRule::default(),
    };
    let grid = rule.grid(&model)?;
    let options = SimulationOptions { retain_state: args.retain_state };
    let record = simulate_with(&model, args.theta, grid, args.seed, options)?;
    let file = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_binary(&record, BufWriter::new(file))?;
    if let Some(path) = &args.csv {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_csv(&record, BufWriter::new(file))?;
    }
    print_toml(&SimulateSummary {
        out: args.out,
        seed: format!("{:#018x}", record.seed),
        rng_algo: record.rng_algo.clone(),
        n_modes: model.n_modes(),
        n_steps: grid.n_steps,
        dt: grid.dt(),
        states_retained: args.retain_state,
    })?;
    Ok(0)
}

fn estimate(args: EstimateArgs) -> anyhow::Result<u8> {
    let file = fs::File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let record = read_binary(BufReader::new(file))?;
    let model = match &args.config {
        Some(path) => load_model(path)?,
        None => (*record.model).clone(),
    };
    let options: EstimatorOptions = match &args.options {
        Some(path) => toml::from_str(&fs::read_to_string(path)?).map_err(|e| spdenoise::Error::Config(e.to_string()))?,
        None => EstimatorOptions::default(),
    };
    print_toml(&estimate_with(&model, &record, &options)?)?;
    Ok(0)
}

fn rate(args: RateArgs) -> anyhow::Result<u8> {
    let model = load_model(&args.config)?;
    let report = rate_report(&model, args.theta)?;
    print_toml(&report)?;
    if let Some(alpha) = args.alpha {
        let Some(spec) = &model.spec else { bail!("the nonparametric rate needs a model family") };
        let rate = nonparametric_rate(
            spec.family,
            alpha,
            spec.d,
            spec.beta.unwrap_or(0.0),
            spec.horizon,
            spec.eps,
            spec.nu.unwrap_or(1.0),
        )?;
        #[derive(Serialize)]
        struct Nonparametric<T> {
            nonparametric: T,
        }
        print_toml(&Nonparametric { nonparametric: rate })?;
    }
    Ok(0)
}

fn hellinger(args: HellingerArgs) -> anyhow::Result<u8> {
    let report = match (&args.config, args.sigma0, args.sigma1) {
        (Some(path), _, _) => {
            let model = load_model(path)?;
            let (Some(t0), Some(t1)) = (args.theta0, args.theta1) else { bail!("--theta0 and --theta1 are required") };
            minimax_report(&model, t0, t1)?
        }
        (None, Some(s0), Some(s1)) => HellingerReport::scalar(s0, s1)?,
        _ => return Err(spdenoise::Error::Config("give --config with --theta0/--theta1, or --sigma0/--sigma1".into()).into()),
    };
    print_toml(&report)?;
    Ok(0)
}

#[derive(Serialize)]
struct ExperimentReport<'a> {
    fit: &'a spdenoise::harness::SlopeFit,
    summary: &'a [spdenoise::harness::SweepSummary],
}

fn experiment(args: ExperimentArgs, workers: Option<usize>) -> anyhow::Result<u8> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut config = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if args.csv.is_some() {
        config.outputs.csv = args.csv;
    }
    if args.plot.is_some() {
        config.outputs.plot = args.plot;
    }
    let output = run_experiment(&config, workers)?;
    emit_outputs(&output, &config)?;
    print_toml(&ExperimentReport { fit: &output.fit, summary: &output.summaries })?;
    Ok(0)
}

fn oracle_check() -> anyhow::Result<u8> {
    let mut failed = 0;
    for outcome in standard_suite()? {
        let mark = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{mark} {}: {:.6e} {}", outcome.name, outcome.value, outcome.limit);
        failed += usize::from(!outcome.passed);
    }
    Ok(if failed == 0 { 0 } else { ORACLE_FAILURE })
}
