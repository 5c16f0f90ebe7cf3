//! Exact-in-law simulation of the mode processes and their noisy
//! integrated observations on a uniform grid.

mod io;
mod moments;
pub mod rng;

pub use io::{read_binary, write_binary, write_csv};
pub use moments::{step_moments, InnovationFactor, StepMoments, SERIES_RADIUS};

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::spectral::{ModeSpec, SpectralModel};

/// Uniform grid `t_i = i * dt`, `i = 0..=n_steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(invalid(format!("horizon {horizon} must be positive")));
        }
        if n_steps == 0 {
            return Err(invalid("n_steps must be positive"));
        }
        Ok(Self { horizon, n_steps })
    }

    /// Grid with step as close to `dt` as an integer step count allows.
    pub fn with_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid(format!("dt = {dt} must be positive")));
        }
        Self::new(horizon, ((horizon / dt).round() as usize).max(1))
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }
}

/// Noisy increments of every mode, with enough provenance to regenerate them.
#[derive(Clone, Debug)]
pub struct ObservationRecord {
    pub model: Arc<SpectralModel>,
    pub theta_true: f64,
    pub grid: TimeGrid,
    /// `dy[k][i - 1]` is the increment of mode `k` over `(t_{i-1}, t_i]`.
    pub dy: Vec<Vec<Complex64>>,
    pub seed: u64,
    pub rng_algo: String,
    /// `states[k][i - 1]` is the state of mode `k` at `t_i`, when retained.
    pub states: Option<Vec<Vec<Complex64>>>,
}

impl ObservationRecord {
    /// Record with every increment multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.dy {
            for v in row.iter_mut() {
                *v *= c;
            }
        }
        out
    }

    /// Sums `factor` consecutive increments, giving the record on a grid
    /// `factor` times coarser. State paths are subsampled.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.grid.n_steps.is_multiple_of(factor) {
            return Err(invalid(format!("factor {factor} must divide n_steps = {}", self.grid.n_steps)));
        }
        let grid = TimeGrid::new(self.grid.horizon, self.grid.n_steps / factor)?;
        let dy = self
            .dy
            .iter()
            .map(|row| row.chunks_exact(factor).map(|c| c.iter().sum()).collect())
            .collect();
        let states = self.states.as_ref().map(|s| {
            s.iter()
                .map(|row| row.iter().skip(factor - 1).step_by(factor).copied().collect())
                .collect()
        });
        Ok(Self { grid, dy, states, ..self.clone() })
    }

    pub fn validate_shape(&self) -> Result<()> {
        if self.dy.len() != self.model.n_modes() {
            return Err(Error::ShapeMismatch(format!(
                "{} increment rows for {} modes",
                self.dy.len(),
                self.model.n_modes()
            )));
        }
        if let Some(k) = self.dy.iter().position(|row| row.len() != self.grid.n_steps) {
            return Err(Error::ShapeMismatch(format!(
                "mode {k} has {} increments, grid has {} steps",
                self.dy[k].len(),
                self.grid.n_steps
            )));
        }
        Ok(())
    }
}

/// Simulation switches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimulationOptions {
    pub retain_state: bool,
}

/// Simulates all modes from `x_0 = 0` with exact Gaussian transitions.
pub fn simulate_observations(
    model: &Arc<SpectralModel>,
    theta: f64,
    grid: TimeGrid,
    seed: u64,
) -> Result<ObservationRecord> {
    simulate_with(model, theta, grid, seed, SimulationOptions::default())
}

pub fn simulate_with(
    model: &Arc<SpectralModel>,
    theta: f64,
    grid: TimeGrid,
    seed: u64,
    options: SimulationOptions,
) -> Result<ObservationRecord> {
    if !model.contains_theta(theta) {
        return Err(invalid(format!(
            "theta = {theta} outside [{}, {}]",
            model.theta_lo, model.theta_hi
        )));
    }
    if (grid.horizon - model.horizon).abs() > 1e-12 * model.horizon {
        return Err(Error::ShapeMismatch(format!(
            "grid horizon {} differs from model horizon {}",
            grid.horizon, model.horizon
        )));
    }
    let dt = grid.dt();
    let paths: Vec<(Vec<Complex64>, Option<Vec<Complex64>>)> = model
        .modes
        .par_iter()
        .enumerate()
        .map(|(k, mode)| {
            let moments = step_moments(mode.lambda(theta), dt)?;
            let mut rng = rng::mode_stream(seed, k);
            Ok(simulate_mode(mode, &moments, model.eps, grid.n_steps, &mut rng, options.retain_state))
        })
        .collect::<Result<_>>()?;
    let (dy, states): (Vec<_>, Vec<_>) = paths.into_iter().unzip();
    Ok(ObservationRecord {
        model: Arc::clone(model),
        theta_true: theta,
        grid,
        dy,
        seed,
        rng_algo: rng::RNG_ALGO.to_string(),
        states: options.retain_state.then(|| states.into_iter().map(Option::unwrap).collect()),
    })
}

fn simulate_mode<R: Rng>(
    mode: &ModeSpec,
    moments: &StepMoments,
    eps: f64,
    n: usize,
    rng: &mut R,
    retain: bool,
) -> (Vec<Complex64>, Option<Vec<Complex64>>) {
    let f = moments.factor();
    let noise = eps * moments.dt.sqrt();
    let b = mode.b;
    let mut dy = Vec::with_capacity(n);
    let mut states = retain.then(|| Vec::with_capacity(n));

    if mode.mult == 1 {
        // Real mode: lambda and all moments are real.
        let (decay, phi, l21) = (moments.decay.re, moments.phi.re, f.l21.re);
        let mut x = 0.0f64;
        for _ in 0..n {
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            let g3: f64 = rng.sample(StandardNormal);
            let integral = phi * x + l21 * g1 + f.l22 * g2;
            x = decay * x + f.l11 * g1;
            dy.push(Complex64::new(b * integral + noise * g3, 0.0));
            if let Some(s) = states.as_mut() {
                s.push(Complex64::new(x, 0.0));
            }
        }
    } else {
        let mut draw = || -> Complex64 {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
        };
        let mut x = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            let g1 = draw();
            let g2 = draw();
            let g3 = draw();
            let integral = moments.phi * x + f.l21 * g1 + g2 * f.l22;
            x = moments.decay * x + g1 * f.l11;
            dy.push(integral * b + g3 * noise);
            if let Some(s) = states.as_mut() {
                s.push(x);
            }
        }
    }
    (dy, states)
}

/// `E[x(t) conj(x(s))]` for a mode started at zero.
pub fn cov_kernel(lambda: Complex64, t: f64, s: f64) -> Complex64 {
    let r = lambda.re;
    let lag = (t - s).abs();
    let low = t.min(s);
    let growth = if r == 0.0 { low } else { (2.0 * r * low).exp_m1() / (2.0 * r) };
    let rotation = Complex64::from_polar(1.0, lambda.im * (t - s));
    rotation * ((r * lag).exp() * growth)
}

/// Monte Carlo estimate of `E[x_k(t) conj(x_k(s))]` with its standard error.
///
/// `t_idx` and `s_idx` index grid points; index 0 is the zero initial state.
pub fn empirical_mode_covariance(
    records: &[ObservationRecord],
    k: usize,
    t_idx: usize,
    s_idx: usize,
) -> Result<(Complex64, f64)> {
    const MIN_REPLICATES: usize = 100;
    if records.len() < MIN_REPLICATES {
        return Err(invalid(format!("need at least {MIN_REPLICATES} replicates, got {}", records.len())));
    }
    let first = &records[0];
    for rec in records {
        let same_model = Arc::ptr_eq(&rec.model, &first.model) || rec.model == first.model;
        if rec.grid != first.grid || rec.theta_true != first.theta_true || !same_model {
            return Err(Error::ShapeMismatch("records differ in model, theta or grid".into()));
        }
    }
    if k >= first.model.n_modes() || t_idx > first.grid.n_steps || s_idx > first.grid.n_steps {
        return Err(invalid("mode or time index out of range"));
    }
    let state = |rec: &ObservationRecord, idx: usize| -> Result<Complex64> {
        let states = rec.states.as_ref().ok_or(Error::MissingState)?;
        Ok(if idx == 0 { Complex64::new(0.0, 0.0) } else { states[k][idx - 1] })
    };
    let samples = records
        .iter()
        .map(|rec| Ok(state(rec, t_idx)? * state(rec, s_idx)?.conj()))
        .collect::<Result<Vec<_>>>()?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<Complex64>() / n;
    let ss: f64 = samples.iter().map(|z| (z - mean).norm_sqr()).sum();
    Ok((mean, (ss / (n - 1.0) / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{model_ou, Design};

    #[test]
    fn kernel_examples() {
        let c = cov_kernel(Complex64::new(0.0, 0.0), 2.0, 0.5);
        assert!((c.re - 0.5).abs() < 1e-15 && c.im == 0.0);
        let c = cov_kernel(Complex64::new(-1.0, 0.0), 1.0, 1.0);
        assert!((c.re - 0.432_332_358_381_693_6).abs() < 1e-15);
        let c = cov_kernel(Complex64::new(-1.0, 1.0), 2.0, 1.0);
        let expected = Complex64::from_polar(0.5 * ((-1.0f64).exp() - (-3.0f64).exp()), 1.0);
        assert!((c - expected).norm() < 1e-15);
    }

    #[test]
    fn determinism_and_shapes() {
        let model = Arc::new(model_ou(1.0, Design::new(0.1, 2.0, 0.5, 1.5)).unwrap());
        let grid = TimeGrid::new(2.0, 40).unwrap();
        let a = simulate_observations(&model, 1.0, grid, 11).unwrap();
        let b = simulate_observations(&model, 1.0, grid, 11).unwrap();
        assert_eq!(a.dy, b.dy);
        a.validate_shape().unwrap();
        assert!(a.dy[0].iter().all(|z| z.im == 0.0));
        let coarse = a.coarsen(4).unwrap();
        assert_eq!(coarse.grid.n_steps, 10);
        let direct: Complex64 = a.dy[0][..4].iter().sum();
        assert_eq!(coarse.dy[0][0], direct);
    }

    #[test]
    fn rejects_mismatched_horizon() {
        let model = Arc::new(model_ou(1.0, Design::new(0.1, 2.0, 0.5, 1.5)).unwrap());
        let grid = TimeGrid::new(3.0, 40).unwrap();
        assert!(simulate_observations(&model, 1.0, grid, 1).is_err());
    }
}
