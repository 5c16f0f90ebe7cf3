//! Monte Carlo sweeps over one design axis and log-log slope fits of the
//! resulting root mean squared errors.

mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_with, EstimatorOptions};
use crate::information::{info_in, lower_bound_rate};
use crate::simulator::{rng, simulate_observations, TimeGrid};
use crate::spectral::{ModelSpec, SpectralModel};

pub use plot::render_svg;

/// Exact CSV header of the per-replicate output.
pub const CSV_HEADER: &str = "run_id,seed,axis,axis_value,theta_true,theta_hat,Z,N,degenerate,I_n,v_n_lower";

/// Share of degenerate replicates at one sweep value above which a run aborts.
pub const MAX_DEGENERATE_SHARE: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    T,
    #[serde(rename = "eps")]
    Eps,
    #[serde(rename = "nu")]
    Nu,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::T => "T",
            Axis::Eps => "eps",
            Axis::Nu => "nu",
        }
    }

    /// Copy of `spec` with this axis set to `value`.
    pub fn apply(self, spec: &ModelSpec, value: f64) -> ModelSpec {
        let mut spec = spec.clone();
        match self {
            Axis::T => spec.horizon = value,
            Axis::Eps => spec.eps = value,
            Axis::Nu => spec.nu = Some(value),
        }
        spec
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: Axis,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThetaRule {
    #[serde(rename = "uniform-in-range")]
    UniformInRange,
}

/// A fixed true value, or one drawn per replicate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaTrue {
    Value(f64),
    Rule(ThetaRule),
}

/// Time step rule. `Auto` uses `dt = min(cap, c / max |lambda_bar|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridRule {
    NSteps { n_steps: usize },
    Dt { dt: f64 },
    Auto {
        #[serde(default = "auto_c")]
        c: f64,
        #[serde(default = "auto_cap")]
        cap: f64,
    },
}

fn auto_c() -> f64 {
    0.2
}

fn auto_cap() -> f64 {
    0.05
}

impl Default for GridRule {
    fn default() -> Self {
        GridRule::Auto { c: auto_c(), cap: auto_cap() }
    }
}

impl GridRule {
    pub fn grid(&self, model: &SpectralModel) -> Result<TimeGrid> {
        match *self {
            GridRule::NSteps { n_steps } => TimeGrid::new(model.horizon, n_steps),
            GridRule::Dt { dt } => TimeGrid::with_step(model.horizon, dt),
            GridRule::Auto { c, cap } => {
                let top = model.max_abs_lambda_bar();
                let dt = if top > 0.0 { cap.min(c / top) } else { cap };
                TimeGrid::with_step(model.horizon, dt)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub sweep: Sweep,
    pub replicates: usize,
    pub theta_true: ThetaTrue,
    #[serde(default)]
    pub grid: GridRule,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub estimator: EstimatorOptions,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let values = &self.sweep.values;
        if values.is_empty() {
            return Err(Error::Config("sweep has no values".into()));
        }
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("sweep values must be positive and finite".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep values must be strictly increasing".into()));
        }
        if self.replicates < 2 {
            return Err(Error::Config(format!("need at least 2 replicates, got {}", self.replicates)));
        }
        if let ThetaTrue::Value(theta) = self.theta_true {
            if !(theta >= self.model.theta_lo && theta <= self.model.theta_hi) {
                return Err(Error::Config(format!("theta_true = {theta} outside the model range")));
            }
        }
        if self.sweep.axis == Axis::Nu && self.model.nu.is_none() && self.model.family == crate::spectral::Family::Ou {
            return Err(Error::Config("the OU model has no nu axis".into()));
        }
        match self.grid {
            GridRule::NSteps { n_steps: 0 } => Err(Error::Config("n_steps must be positive".into())),
            GridRule::Dt { dt } if !(dt > 0.0) => Err(Error::Config("dt must be positive".into())),
            GridRule::Auto { c, cap } if !(c > 0.0 && cap > 0.0) => {
                Err(Error::Config("auto grid constants must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// One replicate at one sweep value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub run_id: u64,
    pub seed: u64,
    pub axis: Axis,
    pub axis_value: f64,
    pub theta_true: f64,
    pub theta_hat: f64,
    #[serde(rename = "Z")]
    pub z: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub degenerate: bool,
    #[serde(rename = "I_n")]
    pub i_n: f64,
    pub v_n_lower: f64,
}

/// Per sweep value aggregate; degenerate replicates are excluded from the RMSE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub axis_value: f64,
    pub rmse: f64,
    pub valid: usize,
    pub degenerate: usize,
    pub under_resolved_fraction: f64,
    pub n_steps: usize,
    pub dt: f64,
    pub n_modes: usize,
    #[serde(rename = "I_n_bar")]
    pub i_n_bar: f64,
    pub v_n_lower: f64,
}

/// Least-squares line through `(log x, log RMSE)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; `+inf` with fewer than three points.
    pub stderr: f64,
    pub r2: f64,
    pub points: Vec<(f64, f64)>,
}

impl SlopeFit {
    pub fn fit(points: Vec<(f64, f64)>) -> Self {
        let k = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
        let my = points.iter().map(|p| p.1).sum::<f64>() / k;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
        if points.len() < 2 || sxx == 0.0 {
            return Self { slope: f64::NAN, intercept: my, stderr: f64::INFINITY, r2: f64::NAN, points };
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let sse = (syy - slope * sxy).max(0.0);
        let stderr = if points.len() > 2 { (sse / (k - 2.0) / sxx).sqrt() } else { f64::INFINITY };
        let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
        Self { slope, intercept, stderr, r2, points }
    }

    pub fn is_degenerate(&self) -> bool {
        !self.stderr.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<Row>,
    pub summaries: Vec<SweepSummary>,
    pub fit: SlopeFit,
}

/// Builds a rayon pool of `workers` threads; `None` reads `WORKERS` and falls
/// back to the rayon default.
pub fn worker_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let workers = match workers {
        Some(w) => w,
        None => match std::env::var("WORKERS") {
            Ok(text) => text.trim().parse().map_err(|_| Error::Config(format!("WORKERS = {text:?} is not a count")))?,
            Err(_) => 0,
        },
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

/// Replicate `rep` uses the same record seed at every sweep value.
pub fn replicate_seed(master: u64, rep: usize) -> u64 {
    rng::replicate_seed(master, rep as u64)
}

fn draw_theta(rule: ThetaTrue, model: &SpectralModel, seed: u64) -> f64 {
    match rule {
        ThetaTrue::Value(theta) => theta,
        ThetaTrue::Rule(ThetaRule::UniformInRange) => {
            let mut stream = rng::stream_from_key(rng::derive(seed, u64::MAX));
            let u: f64 = stream.random();
            model.theta_lo + u * (model.theta_hi - model.theta_lo)
        }
    }
}

/// Runs every (sweep value, replicate) unit. Results do not depend on the
/// number of workers: every unit owns its random streams and all reductions
/// run in unit order.
pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutput> {
    config.validate()?;
    let pool = worker_pool(workers)?;
    let chunk = pool.current_num_threads().max(1);
    let mut rows = Vec::with_capacity(config.sweep.values.len() * config.replicates);
    let mut summaries = Vec::with_capacity(config.sweep.values.len());

    for (vi, &value) in config.sweep.values.iter().enumerate() {
        let model = Arc::new(config.sweep.axis.apply(&config.model, value).build()?);
        let grid = config.grid.grid(&model)?;
        let v_n = lower_bound_rate(&model);
        let reps: Vec<usize> = (0..config.replicates).collect();
        let mut results = Vec::with_capacity(config.replicates);
        // Chunks of one unit per worker bound the number of live records.
        for block in reps.chunks(chunk) {
            let part: Vec<Result<(Row, f64)>> = pool.install(|| {
                block
                    .par_iter()
                    .map(|&rep| {
                        let seed = replicate_seed(config.master_seed, rep);
                        let theta = draw_theta(config.theta_true, &model, seed);
                        let record = simulate_observations(&model, theta, grid, seed)?;
                        let est = estimate_with(&model, &record, &config.estimator)?;
                        let row = Row {
                            run_id: (vi * config.replicates + rep) as u64,
                            seed,
                            axis: config.sweep.axis,
                            axis_value: value,
                            theta_true: theta,
                            theta_hat: est.theta_hat,
                            z: est.z,
                            n: est.n,
                            degenerate: est.degenerate,
                            i_n: info_in(&model, theta),
                            v_n_lower: v_n,
                        };
                        Ok((row, est.under_resolved_fraction))
                    })
                    .collect()
            });
            results.extend(part);
        }
        let results: Vec<(Row, f64)> = results.into_iter().collect::<Result<_>>()?;
        let degenerate = results.iter().filter(|r| r.0.degenerate).count();
        let valid: Vec<&Row> = results.iter().map(|r| &r.0).filter(|r| !r.degenerate).collect();
        let rmse = if valid.is_empty() {
            f64::NAN
        } else {
            (valid.iter().map(|r| (r.theta_hat - r.theta_true).powi(2)).sum::<f64>() / valid.len() as f64).sqrt()
        };
        summaries.push(SweepSummary {
            axis_value: value,
            rmse,
            valid: valid.len(),
            degenerate,
            under_resolved_fraction: results.first().map_or(0.0, |r| r.1),
            n_steps: grid.n_steps,
            dt: grid.dt(),
            n_modes: model.n_modes(),
            i_n_bar: info_in(&model, model.theta_hi),
            v_n_lower: v_n,
        });
        rows.extend(results.into_iter().map(|r| r.0));
    }

    let excess: Vec<String> = summaries
        .iter()
        .filter(|s| s.degenerate as f64 > MAX_DEGENERATE_SHARE * config.replicates as f64)
        .map(|s| format!("{}={}: {} of {}", config.sweep.axis.as_str(), s.axis_value, s.degenerate, config.replicates))
        .collect();
    if !excess.is_empty() {
        return Err(Error::DegenerateExcess(excess.join("; ")));
    }
    let points = summaries.iter().map(|s| (s.axis_value.ln(), s.rmse.ln())).collect();
    Ok(ExperimentOutput { rows, summaries, fit: SlopeFit::fit(points) })
}

/// Path of the per sweep value sidecar next to the replicate CSV.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.csv")
}

/// Writes the replicate CSV, its summary sidecar and, when requested, the SVG
/// plot. Existing files are overwritten.
pub fn emit_outputs(output: &ExperimentOutput, config: &ExperimentConfig) -> Result<()> {
    if output.rows.is_empty() {
        return Err(Error::Config("no rows to write".into()));
    }
    if let Some(path) = &config.outputs.csv {
        write_rows(&output.rows, path)?;
        let mut sidecar = csv::Writer::from_path(summary_path(path)).map_err(csv_error)?;
        for summary in &output.summaries {
            sidecar.serialize(summary).map_err(csv_error)?;
        }
        sidecar.flush()?;
    }
    if let Some(path) = &config.outputs.plot {
        fs::write(path, render_svg(&output.fit, config.sweep.axis.as_str()))?;
    }
    Ok(())
}

pub fn write_rows(rows: &[Row], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        writer.serialize(row).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    reader.deserialize().map(|r| r.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let fit = SlopeFit::fit(vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.0)]);
        assert!((fit.slope + 0.5).abs() < 1e-15);
        assert!((fit.intercept - 1.0).abs() < 1e-15);
        assert!(fit.stderr < 1e-7);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_is_degenerate() {
        let fit = SlopeFit::fit(vec![(1.0, 2.0)]);
        assert!(fit.is_degenerate());
        assert_eq!(fit.points.len(), 1);
        assert!(SlopeFit::fit(vec![(0.0, 0.0), (1.0, 1.0)]).is_degenerate());
    }
}
