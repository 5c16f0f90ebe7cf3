//! Information functionals, lower-bound rates and closed-form rate tables.

mod rates;

pub use rates::{
    nonparametric_rate, parametric_rate, EllbowThreshold, ExponentRecord, NonparametricRate, ParametricRate,
    RateParams, Regime,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spectral::{clip_inv, clip_low, ModeSpec, SpectralModel};

/// A named condition evaluated at the given finite parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityFlag {
    pub name: String,
    pub holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ValidityFlag {
    pub fn new(name: impl Into<String>, holds: bool) -> Self {
        Self { name: name.into(), holds, note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Whether [`info_in_checked`] looks for a non-decaying tail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceCheck {
    #[default]
    Off,
    /// Infinite when the fitted decay of the last quartile of summands is no
    /// faster than `1/k`.
    LastQuartile,
}

/// Per-mode summand of [`info_in`] without the factor `T`.
fn info_summand(mode: &ModeSpec, model: &SpectralModel, theta: f64) -> f64 {
    let t = model.horizon;
    let bar = mode.lambda(model.theta_hi);
    let noise = model.eps.powi(4) * clip_low(bar.re.abs(), 1.0, t) * clip_low(bar.norm(), 1.0, t).powi(3)
        / mode.b.powi(4);
    let r = mode.lambda(theta).re.abs();
    mode.weight() * mode.ell.norm_sqr() / (noise + 1.0) * clip_inv(r, 1.0, t)
}

/// `T sum_k mult |ell|^2 (eps^4 |r_bar|_{1/T} |l_bar|_{1/T}^3 b^-4 + 1)^-1 |r(theta)|_T^-1`.
pub fn info_in(model: &SpectralModel, theta: f64) -> f64 {
    model.horizon * model.modes.iter().map(|m| info_summand(m, model, theta)).sum::<f64>()
}

pub fn info_in_checked(model: &SpectralModel, theta: f64, check: DivergenceCheck) -> f64 {
    if check == DivergenceCheck::LastQuartile && !model.finite_dimensional {
        if let Some(p) = tail_decay(model, theta) {
            if p >= -1.0 {
                return f64::INFINITY;
            }
        }
    }
    info_in(model, theta)
}

/// `T^-1/2 [sum_k mult |ell|^2 (eps^4 |r_bar|_{1/T}^4 b^-4 + 1)^-1 |r_bar|_T^-1]^-1/2`.
pub fn lower_bound_rate(model: &SpectralModel) -> f64 {
    let t = model.horizon;
    let sum: f64 = model
        .modes
        .iter()
        .map(|mode| {
            let r = mode.lambda(model.theta_hi).re.abs();
            let noise = model.eps.powi(4) * clip_low(r, 1.0, t).powi(4) / mode.b.powi(4);
            mode.weight() * mode.ell.norm_sqr() / (noise + 1.0) * clip_inv(r, 1.0, t)
        })
        .sum();
    if sum > 0.0 {
        (t * sum).powf(-0.5)
    } else {
        f64::INFINITY
    }
}

/// Left side of the variance condition divided by `info_in(theta)^2`.
pub fn varn_condition_ratio(model: &SpectralModel, theta: f64) -> f64 {
    let t = model.horizon;
    let e4 = model.eps.powi(4);
    let lhs: f64 = model
        .modes
        .iter()
        .map(|mode| {
            let bar = mode.lambda(model.theta_hi);
            let b4 = mode.b.powi(4);
            let damp = e4 * clip_low(bar.re.abs(), 1.0, t) * clip_low(bar.norm(), 1.0, t).powi(3) / b4 + 1.0;
            let inner = e4 * clip_low(bar.norm(), 1.0, t) / b4 + clip_inv(mode.lambda(theta).re.abs(), 3.0, t);
            mode.weight() * mode.ell.norm_sqr().powi(2) / (damp * damp) * inner
        })
        .sum::<f64>()
        * t;
    let info = info_in(model, theta);
    lhs / (info * info)
}

fn tail_decay(model: &SpectralModel, theta: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = model
        .modes
        .iter()
        .map(|m| (m.weight(), info_summand(m, model, theta) / m.weight()))
        .collect();
    tail_slope(&pts)
}

/// Decay exponent of a mode sum given `(dimension, summand per dimension)`
/// pairs in mode order: the OLS slope of log summand against log cumulative
/// dimension over the last quartile. `None` with fewer than 8 modes; `-inf`
/// when the trailing summands vanish.
pub(crate) fn tail_slope(points: &[(f64, f64)]) -> Option<f64> {
    const MIN_MODES: usize = 8;
    let k = points.len();
    if k < MIN_MODES {
        return None;
    }
    let mut index = 0.0;
    let cumulative: Vec<(f64, f64)> = points
        .iter()
        .map(|&(w, v)| {
            index += w;
            (index, v)
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        cumulative[k - k / 4..].iter().filter(|p| p.1 > 0.0).map(|&(x, y)| (x.ln(), y.ln())).unzip();
    if xs.len() < 2 {
        return Some(f64::NEG_INFINITY);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(if sxx == 0.0 { 0.0 } else { sxy / sxx })
}

/// Integral-comparison bound on the part of `info_in(theta_hi)` lost to
/// truncation, extrapolating the tail as a power of the mode index.
///
/// Zero for finite-dimensional models; `+inf` when the decay cannot be
/// inferred or is too slow to sum.
pub fn truncation_tail(model: &SpectralModel) -> f64 {
    if model.finite_dimensional {
        return 0.0;
    }
    let theta = model.theta_hi;
    let Some(p) = tail_decay(model, theta) else {
        return f64::INFINITY;
    };
    if p >= -1.0 {
        return f64::INFINITY;
    }
    let last = model.modes.last().expect("validated model has modes");
    let dims = model.real_dimension() as f64;
    let per_dim = info_summand(last, model, theta) / last.weight();
    model.horizon * per_dim * dims / (-p - 1.0)
}

/// Everything the `rate` command reports for one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    #[serde(rename = "I_n")]
    pub i_n: f64,
    pub v_n_lower: f64,
    pub varn_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ParametricRate>,
    pub validity: Vec<ValidityFlag>,
    pub tail_estimate: f64,
}

/// Report at `theta` (defaults to `theta_hi`). The closed form is filled in
/// when the model carries its text description.
pub fn rate_report(model: &SpectralModel, theta: Option<f64>) -> Result<RateReport> {
    let theta = theta.unwrap_or(model.theta_hi);
    if !model.contains_theta(theta) {
        return Err(crate::error::invalid(format!("theta = {theta} outside the model range")));
    }
    let i_n = info_in(model, theta);
    let i_bar = info_in(model, model.theta_hi);
    let mut validity = vec![
        ValidityFlag::new("range_separation", model.theta_lo + i_bar.powf(-0.5) <= model.theta_hi)
            .with_note(format!("theta_lo + I(theta_hi)^-1/2 = {}", model.theta_lo + i_bar.powf(-0.5))),
        ValidityFlag::new("range_comparable", model.theta_lo > 0.0)
            .with_note(format!("theta_hi / theta_lo = {}", model.theta_hi / model.theta_lo)),
    ];
    let closed_form = match &model.spec {
        Some(spec) => {
            let params = RateParams::from_spec(spec);
            let rate = parametric_rate(spec.family, &params)?;
            validity.extend(rate.validity.iter().cloned());
            Some(rate)
        }
        None => None,
    };
    Ok(RateReport {
        i_n,
        v_n_lower: lower_bound_rate(model),
        varn_ratio: varn_condition_ratio(model, theta),
        closed_form,
        validity,
        tail_estimate: truncation_tail(model),
    })
}
