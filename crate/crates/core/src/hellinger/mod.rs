//! Hellinger distances and bounds between Gaussian observation laws, and the
//! two-point minimax reduction.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::information::tail_slope;
use crate::spectral::{clip_inv, clip_low, SpectralModel};

/// Lower bound on the minimax risk when two hypotheses are within Hellinger
/// distance one: `(2 - sqrt 3) / 4`.
pub const TWO_POINT_RISK: f64 = 0.066_987_298_107_780_68;

/// Squared Hellinger distance between `N(0, s0^2)` and `N(0, s1^2)`, exact and
/// the quadratic bound `(s - 1/s)^2 / 4` with `s = s1 / s0`.
pub fn hellinger_scalar(sigma0: f64, sigma1: f64) -> Result<(f64, f64)> {
    if !(sigma0 > 0.0 && sigma1 > 0.0) || !sigma0.is_finite() || !sigma1.is_finite() {
        return Err(invalid(format!("standard deviations must be positive, got {sigma0} and {sigma1}")));
    }
    let s = sigma1 / sigma0;
    // 2 - 2 sqrt(1 - x) with x = (s - 1)^2 / (s^2 + 1), written without cancellation.
    let x = (s - 1.0).powi(2) / (s * s + 1.0);
    let exact = 2.0 * x / (1.0 + (1.0 - x).sqrt());
    let bound = 0.25 * (s - 1.0 / s).powi(2);
    Ok((exact, bound))
}

/// `sum_k mult_k (sqrt(tau_k) - 1/sqrt(tau_k))^2 / 4` over variance ratios.
pub fn hellinger_diagonal(taus: &[(f64, u32)]) -> Result<f64> {
    let mut sum = 0.0;
    for &(tau, mult) in taus {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(invalid(format!("variance ratio {tau} must be positive")));
        }
        let r = tau.sqrt();
        sum += mult as f64 * (r - 1.0 / r).powi(2);
    }
    Ok(0.25 * sum)
}

/// `sqrt((e^x - 1 - x) / x^2)`, equal to `1/sqrt 2` at zero and `+inf` past
/// the exponential range.
pub fn f_factor(x: f64) -> f64 {
    if x > 700.0 {
        return f64::INFINITY;
    }
    let sq = if x.abs() < 1e-2 {
        0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x * (1.0 / 120.0 + x / 720.0)))
    } else {
        (x.exp_m1() - x) / (x * x)
    };
    sq.sqrt()
}

/// `sqrt(3/4 + e^(2 r T) / 4)` for the largest positive real part `r`.
pub fn alpha_theta(r_plus_max: f64, horizon: f64) -> f64 {
    if r_plus_max <= 0.0 {
        return 1.0;
    }
    (0.75 + 0.25 * (2.0 * r_plus_max * horizon).exp()).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Scalar,
    Diagonal,
    CommutingGeneral,
    CommutingContractive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minimax {
    pub delta: f64,
    pub risk_lower_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HellingerReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h2_exact: Option<f64>,
    pub h2_bound: f64,
    pub variant: Variant,
    /// The bound is finite and its summands decay fast enough to sum.
    pub equivalent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contractive: Option<f64>,
    pub general: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimax: Option<Minimax>,
    pub conclusion: String,
}

impl HellingerReport {
    pub fn scalar(sigma0: f64, sigma1: f64) -> Result<Self> {
        let (exact, bound) = hellinger_scalar(sigma0, sigma1)?;
        Ok(Self {
            h2_exact: Some(exact),
            h2_bound: bound,
            variant: Variant::Scalar,
            equivalent: bound.is_finite(),
            contractive: None,
            general: bound,
            minimax: None,
            conclusion: String::new(),
        })
    }
}

/// Mode-diagonal bound on the squared Hellinger distance between the laws at
/// `theta0` and `theta1`; the smaller of the applicable variants is reported.
pub fn hellinger_bound_commuting(model: &SpectralModel, theta0: f64, theta1: f64) -> Result<HellingerReport> {
    for theta in [theta0, theta1] {
        if !model.contains_theta(theta) {
            return Err(invalid(format!("theta = {theta} outside [{}, {}]", model.theta_lo, model.theta_hi)));
        }
    }
    let t = model.horizon;
    let eps = model.eps;
    let dtheta = theta1 - theta0;
    let r_plus = |theta: f64| model.modes.iter().map(|m| m.lambda(theta).re.max(0.0)).fold(0.0, f64::max);
    let contractive_ok = r_plus(theta0) == 0.0 && r_plus(theta1) == 0.0;
    let eps_t = [eps / alpha_theta(r_plus(theta0), t), eps / alpha_theta(r_plus(theta1), t)];

    let mut contractive = 0.0;
    let mut general = 0.0;
    let mut per_dim = Vec::with_capacity(model.n_modes());
    for mode in &model.modes {
        let dl2 = dtheta * dtheta * mode.ell.norm_sqr();
        let w = mode.weight();
        let (r0, r1) = (mode.lambda(theta0).re, mode.lambda(theta1).re);
        let b2 = mode.b * mode.b;
        let g = |e: f64, r: f64| 1.0 / (e * e * clip_low(r.abs(), 1.0, t).powi(2) / b2 + 1.0);
        // Products and sums are formed symmetrically so swapping the hypotheses is exact.
        let sym = |a: f64, b: f64| (a.min(b), a.max(b));
        let (g_lo, g_hi) = sym(g(eps, r0), g(eps, r1));
        let (c_lo, c_hi) = sym(clip_inv(r0.abs(), 1.0, t), clip_inv(r1.abs(), 1.0, t));
        let c = 0.25 * t * w * dl2 * (g_lo * g_hi) * (c_lo + c_hi);
        let (f_lo, f_hi) = sym(f_factor(2.0 * t * r0).powi(2), f_factor(2.0 * t * r1).powi(2));
        let (h_lo, h_hi) = sym(g(eps_t[0], r0), g(eps_t[1], r1));
        let gen = 0.5 * t * t * w * dl2 * (h_lo * h_hi) * (f_lo + f_hi);
        contractive += c;
        general += gen;
        per_dim.push((w, if contractive_ok { c.min(gen) } else { gen } / w));
    }
    let (bound, variant) = if contractive_ok && contractive <= general {
        (contractive, Variant::CommutingContractive)
    } else {
        (general, Variant::CommutingGeneral)
    };
    let tail_ok = model.finite_dimensional || tail_slope(&per_dim).is_none_or(|p| p < -1.0);
    Ok(HellingerReport {
        h2_exact: None,
        h2_bound: bound,
        variant,
        equivalent: bound.is_finite() && tail_ok,
        contractive: contractive_ok.then_some(contractive),
        general,
        minimax: None,
        conclusion: String::new(),
    })
}

/// Two-point reduction: when the bound gives `H <= 1`, any estimator errs by at
/// least `|theta1 - theta0| / 2` with probability at least [`TWO_POINT_RISK`].
pub fn minimax_report(model: &SpectralModel, theta0: f64, theta1: f64) -> Result<HellingerReport> {
    if theta0 == theta1 {
        return Err(invalid("the two hypotheses must differ"));
    }
    let mut report = hellinger_bound_commuting(model, theta0, theta1)?;
    if report.h2_bound.sqrt() <= 1.0 {
        let delta = (theta1 - theta0).abs();
        report.minimax = Some(Minimax { delta, risk_lower_bound: TWO_POINT_RISK });
        report.conclusion = format!("risk >= {TWO_POINT_RISK:.6} at separation {delta}");
    } else {
        report.conclusion = "no conclusion at this separation".into();
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceSeries {
    pub partial_sum: f64,
    pub exponent: f64,
    pub equivalent: bool,
}

/// Partial sum `T delta^2 sum_{k <= K} k^((2 m1 - m) / d)` for the noiseless
/// equivalence question; the laws are equivalent iff the exponent is below -1.
pub fn equivalence_series(m: f64, m1: f64, d: usize, delta: f64, horizon: f64, k_max: u64) -> Result<EquivalenceSeries> {
    if !(m >= m1 && m1 >= 0.0) {
        return Err(invalid(format!("need m >= m1 >= 0, got m = {m}, m1 = {m1}")));
    }
    if !(delta > 0.0) || d == 0 || k_max == 0 {
        return Err(invalid("need delta > 0, d > 0 and K_max > 0"));
    }
    let exponent = (2.0 * m1 - m) / d as f64;
    // Smallest terms first.
    let sum: f64 = (1..=k_max).rev().map(|k| (k as f64).powf(exponent)).sum();
    Ok(EquivalenceSeries { partial_sum: horizon * delta * delta * sum, exponent, equivalent: exponent < -1.0 })
}
