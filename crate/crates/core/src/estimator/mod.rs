//! Preaveraging estimator of the drift scale from noisy mode increments.
//!
//! Per mode the estimator forms `U_i = sum_{j<i} psi(t_i - t_j, t_j) conj(dY_j)`,
//! a hat-kernel average of past increments, and regresses the increments on
//! it. The weight of mode `k` is [`kernel_weight`].
//!
//! Two discretizations of the kernel derivative are provided. [`Scheme::Literal`]
//! point-samples the right-continuous derivative and carries a bias of order
//! `dt / |lambda_bar|^2` in the ratio. [`Scheme::Exponential`] replaces it by a
//! one-step backward difference of `U` weighted by `exp(-(m + c ell) dt)`, for
//! which the estimating equation is unbiased up to a factor
//! `1 + O((theta - c) ell dt)`; the centering value `c` starts at `theta_hi`
//! and may be moved to the first-pass estimate.

mod sums;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::ObservationRecord;
use crate::spectral::{clip_inv, clip_low, ModeSpec, SpectralModel};
use sums::{Sums, Window};

/// Hat kernel `min(v, m - v)+` with support `m = min(1/a_abs, T - s)`.
pub fn psi(v: f64, s: f64, a_abs: f64, horizon: f64) -> f64 {
    let m = support(a_abs, horizon - s);
    v.max(0.0).min((m - v).max(0.0))
}

/// Derivative of [`psi`] in `v`; right limits at the breakpoints.
pub fn psi_dt(v: f64, s: f64, a_abs: f64, horizon: f64) -> f64 {
    let m = support(a_abs, horizon - s);
    if v < 0.0 || v >= m {
        0.0
    } else if v < 0.5 * m {
        1.0
    } else {
        -1.0
    }
}

fn support(a_abs: f64, remaining: f64) -> f64 {
    if a_abs == 0.0 {
        remaining
    } else {
        (1.0 / a_abs).min(remaining)
    }
}

/// Mode weight `b^2 (eps^4 |r|_T + b^4 |l|_T^-3)^-1 |l|_T^-1` at `lambda_bar`.
pub fn kernel_weight(mode: &ModeSpec, theta_bar: f64, eps: f64, horizon: f64) -> f64 {
    let lam = mode.lambda(theta_bar);
    let (abs, re) = (lam.norm(), lam.re.abs());
    let b2 = mode.b * mode.b;
    let denom = eps.powi(4) * clip_low(re, 1.0, horizon) + b2 * b2 * clip_inv(abs, 3.0, horizon);
    b2 / denom * clip_inv(abs, 1.0, horizon)
}

/// How the double sums are evaluated. All give the same value up to rounding;
/// `Direct` and `Pruned` agree bit for bit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Summation {
    /// Every pair `j < i`.
    Direct,
    /// Pairs inside the kernel support.
    Pruned,
    /// Linear-time prefix sums.
    Running,
    /// `Running` for modes whose support spans more than [`AUTO_RUNNING_LAGS`] steps.
    #[default]
    Auto,
}

pub const AUTO_RUNNING_LAGS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Scheme {
    Exponential { centering_steps: u32 },
    Literal,
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::Exponential { centering_steps: 2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorOptions {
    pub summation: Summation,
    pub scheme: Scheme,
    /// `|N|` at or below `tolerance` times the data scale counts as zero.
    pub tolerance: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self { summation: Summation::Auto, scheme: Scheme::default(), tolerance: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub z: f64,
    pub n: f64,
    pub theta_hat: f64,
    pub degenerate: bool,
    pub per_mode_n: Vec<f64>,
    /// Value of `|N|` below which the result is declared degenerate.
    pub threshold: f64,
    /// Centering value used for the final `Z`; `NaN` for the literal scheme.
    pub centering: f64,
    /// Share of weighted modes whose kernel spans fewer than three steps.
    pub under_resolved_fraction: f64,
}

struct ModeSums {
    sums: Sums,
    derivative: Complex64,
    scale: f64,
    weight: f64,
    lags: usize,
}

/// Computes the estimator with default options.
pub fn estimate(model: &SpectralModel, obs: &ObservationRecord) -> Result<EstimatorResult> {
    estimate_with(model, obs, &EstimatorOptions::default())
}

pub fn estimate_with(model: &SpectralModel, obs: &ObservationRecord, options: &EstimatorOptions) -> Result<EstimatorResult> {
    if obs.dy.len() != model.n_modes() {
        return Err(Error::ShapeMismatch(format!(
            "record has {} modes, model has {}",
            obs.dy.len(),
            model.n_modes()
        )));
    }
    obs.validate_shape()?;
    if (obs.grid.horizon - model.horizon).abs() > 1e-12 * model.horizon {
        return Err(Error::ShapeMismatch(format!(
            "record horizon {} differs from model horizon {}",
            obs.grid.horizon, model.horizon
        )));
    }
    if let Some(k) = obs.dy.iter().position(|row| row.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
        return Err(Error::NonFinite(format!("increment of mode {k}")));
    }
    if !(options.tolerance >= 0.0) {
        return Err(Error::InvalidParameter("tolerance must be nonnegative".into()));
    }

    let n = obs.grid.n_steps;
    let h = obs.grid.dt();
    let theta_bar = model.theta_hi;
    let literal = matches!(options.scheme, Scheme::Literal);

    let per_mode: Vec<Option<ModeSums>> = model
        .modes
        .par_iter()
        .zip(obs.dy.par_iter())
        .map(|(mode, a)| {
            if mode.ell == Complex64::new(0.0, 0.0) {
                return None;
            }
            let support = clip_inv(mode.lambda(theta_bar).norm(), 1.0, model.horizon);
            let win = Window { n, h, support };
            let lags = win.lag_bound();
            let sums = match options.summation {
                Summation::Direct => sums::windowed(a, win, None),
                Summation::Pruned => sums::windowed(a, win, Some(lags)),
                Summation::Running => sums::running(a, win),
                Summation::Auto if lags > AUTO_RUNNING_LAGS => sums::running(a, win),
                Summation::Auto => sums::windowed(a, win, Some(lags)),
            };
            let derivative = if literal { sums::derivative_sum(a, win) } else { Complex64::new(0.0, 0.0) };
            let energy: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            let weight = mode.weight() * kernel_weight(mode, theta_bar, model.eps, model.horizon);
            let scale = weight * mode.ell.norm_sqr() * 0.5 * support * lags.min(n) as f64 * energy;
            Some(ModeSums { sums, derivative, scale, weight, lags })
        })
        .collect();

    let mut per_mode_n = vec![0.0; model.n_modes()];
    let mut n_total = 0.0;
    let mut scale = 0.0;
    let (mut weighted, mut under) = (0usize, 0usize);
    for (k, entry) in per_mode.iter().enumerate() {
        if let Some(ms) = entry {
            let nk = ms.weight * model.modes[k].ell.norm_sqr() * ms.sums.a.re;
            per_mode_n[k] = nk;
            n_total += nk;
            scale += ms.scale;
            weighted += 1;
            if ms.lags < 3 {
                under += 1;
            }
        }
    }
    if !n_total.is_finite() {
        return Err(Error::NonFinite("denominator".into()));
    }
    let threshold = options.tolerance * scale;
    let under_resolved_fraction = if weighted == 0 { 0.0 } else { under as f64 / weighted as f64 };
    let degenerate = n_total.abs() <= threshold;

    let numerator = |c: f64| -> f64 {
        let mut z = 0.0;
        for (mode, entry) in model.modes.iter().zip(&per_mode) {
            let Some(ms) = entry else { continue };
            if ms.sums.a == Complex64::new(0.0, 0.0) && ms.sums.b == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ell_c = mode.ell.conj();
            let nk = ms.weight * mode.ell.norm_sqr() * ms.sums.a.re;
            z += if literal {
                -ms.weight * (ell_c * (ms.derivative + ms.sums.a * mode.m)).re
            } else {
                let rho = (-(mode.m + mode.ell * c) * h).exp();
                -ms.weight / h * (ell_c * (ms.sums.a - ms.sums.b * rho)).re + c * nk
            };
        }
        z
    };

    let (z, centering) = match options.scheme {
        Scheme::Literal => (numerator(f64::NAN), f64::NAN),
        Scheme::Exponential { centering_steps } => {
            let mut c = theta_bar;
            let mut z = numerator(c);
            for _ in 1..centering_steps.max(1) {
                if degenerate {
                    break;
                }
                c = (z / n_total).clamp(model.theta_lo, model.theta_hi);
                z = numerator(c);
            }
            (z, c)
        }
    };

    Ok(EstimatorResult {
        z,
        n: n_total,
        theta_hat: if degenerate { 0.0 } else { z / n_total },
        degenerate,
        per_mode_n,
        threshold,
        centering,
        under_resolved_fraction,
    })
}
