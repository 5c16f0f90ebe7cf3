//! Closed-form parametric and nonparametric rates with their case splits.
//!
//! Every rate is a monomial in `(T, eps, nu, sigma, theta_bar)` times a power
//! of `log(e / eps)`; the powers are returned as an [`ExponentRecord`].

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use super::ValidityFlag;
use crate::error::{invalid, Result};
use crate::spectral::{Family, ModelSpec};

/// Powers of each asymptotic parameter in a rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExponentRecord {
    pub t: f64,
    pub eps: f64,
    pub nu: f64,
    pub sigma: f64,
    pub theta: f64,
    pub log_e_over_eps: f64,
}

impl ExponentRecord {
    fn scaled(self, c: f64) -> Self {
        Self {
            t: self.t * c,
            eps: self.eps * c,
            nu: self.nu * c,
            sigma: self.sigma * c,
            theta: self.theta * c,
            log_e_over_eps: self.log_e_over_eps * c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    ErgodicNoiseNegligible,
    ErgodicNoiseDominated,
    ShortHorizonNoiseNegligible,
    ShortHorizonNoiseDominated,
    Laplacian,
    DiffusionDominated,
    TransportDominated,
    SourceD1,
    SourceD2Log,
    SourceDGe3,
    /// Dimension bound fails: the laws are singular and the rate is zero.
    Identifiable,
    /// Nonparametric rate follows the parametric one.
    ParametricScaling,
    /// Past the ellbow threshold.
    Ellbow,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::ErgodicNoiseNegligible => "ergodic/noise_negligible",
            Regime::ErgodicNoiseDominated => "ergodic/noise_dominated",
            Regime::ShortHorizonNoiseNegligible => "short_horizon/noise_negligible",
            Regime::ShortHorizonNoiseDominated => "short_horizon/noise_dominated",
            Regime::Laplacian => "laplacian",
            Regime::DiffusionDominated => "diffusion_dominated",
            Regime::TransportDominated => "transport_dominated",
            Regime::SourceD1 => "d1",
            Regime::SourceD2Log => "d2_log",
            Regime::SourceDGe3 => "d_ge3",
            Regime::Identifiable => "identifiable",
            Regime::ParametricScaling => "parametric_scaling",
            Regime::Ellbow => "ellbow",
        }
    }
}

/// Inputs to the closed forms. `theta` plays the role of `theta_hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub d: usize,
    pub rho: f64,
    pub beta: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub eps: f64,
    pub nu: f64,
    pub sigma: f64,
    pub theta: f64,
}

impl Default for RateParams {
    fn default() -> Self {
        Self { d: 1, rho: 1.0, beta: 0.0, horizon: 1.0, eps: 0.0, nu: 1.0, sigma: 1.0, theta: 1.0 }
    }
}

impl RateParams {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        Self {
            d: spec.d,
            rho: spec.rho.unwrap_or(1.0),
            beta: spec.beta.unwrap_or(0.0),
            horizon: spec.horizon,
            eps: spec.eps,
            nu: spec.nu.unwrap_or(1.0),
            sigma: spec.sigma.unwrap_or(1.0),
            theta: spec.theta_hi,
        }
    }

    fn log_e_over_eps(&self) -> f64 {
        (E / self.eps).ln()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametricRate {
    pub rate: f64,
    pub exponents: ExponentRecord,
    pub regime: Regime,
    pub validity: Vec<ValidityFlag>,
}

/// Rate of the parametric minimax bound for one of the worked families.
pub fn parametric_rate(family: Family, p: &RateParams) -> Result<ParametricRate> {
    check_params(p)?;
    let d = p.d as f64;
    let (t, eps, nu, b) = (p.horizon, p.eps, p.nu, p.beta);
    let root_t = t.powf(-0.5);
    let identifiable = |bound: f64, name: &str| ParametricRate {
        rate: 0.0,
        exponents: ExponentRecord::default(),
        regime: Regime::Identifiable,
        validity: vec![ValidityFlag::new(name, false).with_note(format!("d = {} >= {bound}", p.d))],
    };
    Ok(match family {
        Family::Ou => {
            let (th, sig) = (p.theta, p.sigma);
            let ergodic = th.sqrt() * root_t >= 1.0 / t;
            let noisy = eps * eps * th * th / (sig * sig) > 1.0;
            let time = if ergodic { th.sqrt() * root_t } else { 1.0 / t };
            let noise = if noisy { eps * eps * th * th / (sig * sig) } else { 1.0 };
            let mut e = ExponentRecord::default();
            if ergodic {
                e.t = -0.5;
                e.theta = 0.5;
            } else {
                e.t = -1.0;
            }
            if noisy {
                e.eps = 2.0;
                e.sigma = -2.0;
                e.theta += 2.0;
            }
            let regime = match (ergodic, noisy) {
                (true, false) => Regime::ErgodicNoiseNegligible,
                (true, true) => Regime::ErgodicNoiseDominated,
                (false, false) => Regime::ShortHorizonNoiseNegligible,
                (false, true) => Regime::ShortHorizonNoiseDominated,
            };
            ParametricRate { rate: time * noise, exponents: e, regime, validity: vec![] }
        }
        Family::FracLaplacian => {
            let bound = (6.0 + 8.0 * b) * p.rho;
            if d >= bound {
                return Ok(identifiable(bound, "dimension_below_(6+8beta)rho"));
            }
            let pe = (2.0 * p.rho + d) / (4.0 * p.rho * (1.0 + b));
            ParametricRate {
                rate: root_t * eps.powf(pe),
                exponents: ExponentRecord { t: -0.5, eps: pe, ..Default::default() },
                regime: Regime::Laplacian,
                validity: vec![ValidityFlag::new("dimension_below_(6+8beta)rho", true)],
            }
        }
        Family::Transport => {
            let bound = 8.0 + 8.0 * b;
            if d >= bound {
                return Ok(identifiable(bound, "dimension_below_8+8beta"));
            }
            let premise = nu.powf(3.0 + 8.0 * b) >= eps.powi(8) * t.powf(-5.0 - 8.0 * b);
            let diffusive = nu >= eps.powf(1.0 / (1.0 + 2.0 * b));
            let (pn, pe, regime) = if diffusive {
                ((2.0 + d + 2.0 * b) / (4.0 + 4.0 * b), d / (4.0 + 4.0 * b), Regime::DiffusionDominated)
            } else {
                ((5.0 + d + 8.0 * b) / (10.0 + 16.0 * b), 2.0 * d / (5.0 + 8.0 * b), Regime::TransportDominated)
            };
            ParametricRate {
                rate: root_t * nu.powf(pn) * eps.powf(pe),
                exponents: ExponentRecord { t: -0.5, eps: pe, nu: pn, ..Default::default() },
                regime,
                validity: vec![
                    ValidityFlag::new("dimension_below_8+8beta", true),
                    ValidityFlag::new("premise_nu^(3+8beta)>=eps^8_T^(-5-8beta)", premise),
                    ValidityFlag::new("lower_bound_matches", diffusive),
                ],
            }
        }
        Family::Source => {
            let bound = 10.0 + 8.0 * b;
            if d >= bound {
                return Ok(identifiable(bound, "dimension_below_10+8beta"));
            }
            let (rate, exponents, regime) = match p.d {
                1 => (
                    root_t * nu.powf(0.25),
                    ExponentRecord { t: -0.5, nu: 0.25, ..Default::default() },
                    Regime::SourceD1,
                ),
                2 => (
                    root_t * nu.sqrt() * p.log_e_over_eps().powf(-0.5),
                    ExponentRecord { t: -0.5, nu: 0.5, log_e_over_eps: -0.5, ..Default::default() },
                    Regime::SourceD2Log,
                ),
                _ => {
                    let pe = (d - 2.0) / (4.0 + 4.0 * b);
                    (
                        root_t * nu.powf(d / 4.0) * eps.powf(pe),
                        ExponentRecord { t: -0.5, nu: d / 4.0, eps: pe, ..Default::default() },
                        Regime::SourceDGe3,
                    )
                }
            };
            ParametricRate {
                rate,
                exponents,
                regime,
                validity: vec![ValidityFlag::new("dimension_below_10+8beta", true)],
            }
        }
    })
}

fn check_params(p: &RateParams) -> Result<()> {
    if p.d == 0 {
        return Err(invalid("d must be positive"));
    }
    let positive = [("T", p.horizon), ("nu", p.nu), ("sigma", p.sigma), ("theta", p.theta), ("rho", p.rho)];
    for (name, v) in positive {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(format!("{name} = {v} must be positive and finite")));
        }
    }
    if !(0.0..=1.0).contains(&p.eps) {
        return Err(invalid(format!("eps = {} outside [0, 1]", p.eps)));
    }
    if !(p.beta >= 0.0) {
        return Err(invalid(format!("beta = {} must be nonnegative", p.beta)));
    }
    Ok(())
}

/// Boundary `T = eps^eps nu^nu` between the two nonparametric regimes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllbowThreshold {
    pub eps: f64,
    pub nu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonparametricRate {
    pub rate: f64,
    pub exponents: ExponentRecord,
    pub regime: Regime,
    /// Ellbow location, ignoring logarithmic factors.
    pub ellbow: EllbowThreshold,
    pub validity: Vec<ValidityFlag>,
}

/// Linear form `c_t log T + c_e log(1/eps) + c_n log(1/nu) + c_l log log(1/eps)`.
#[derive(Clone, Copy)]
struct LogForm([f64; 4]);

impl LogForm {
    fn eval(&self, logs: &[f64; 4]) -> f64 {
        if logs[1].is_infinite() {
            // eps = 0: only the log(1/eps) coefficient survives the ratio.
            return self.0[1];
        }
        self.0.iter().zip(logs).filter(|(c, _)| **c != 0.0).map(|(c, l)| c * l).sum()
    }
}

/// `alpha > num / den` at the given parameters; vacuous when `den = 0`.
fn alpha_condition(alpha: f64, num: LogForm, den: LogForm, logs: &[f64; 4]) -> ValidityFlag {
    let (n, dn) = (num.eval(logs), den.eval(logs));
    if dn == 0.0 {
        ValidityFlag::new("alpha_lower_bound", true).with_note("vacuous: all logarithms vanish")
    } else {
        let bound = n / dn;
        ValidityFlag::new("alpha_lower_bound", alpha > bound).with_note(format!("alpha > {bound} (finite-n proxy)"))
    }
}

/// Pointwise nonparametric lower-bound rate for the diffusivity
/// (`frac_laplacian`), transport and source families.
pub fn nonparametric_rate(
    family: Family,
    alpha: f64,
    d: usize,
    beta: f64,
    horizon: f64,
    eps: f64,
    nu: f64,
) -> Result<NonparametricRate> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid(format!("alpha = {alpha} must be positive")));
    }
    let params = RateParams { d, beta, horizon, eps, nu, ..Default::default() };
    check_params(&params)?;
    let dd = d as f64;
    let (t, b) = (horizon, beta);
    let log_eps = if eps == 0.0 { f64::INFINITY } else { (1.0 / eps).ln() };
    let logs = [t.ln(), log_eps, (1.0 / nu).ln(), log_eps.max(1.0).ln()];

    Ok(match family {
        Family::Ou => return Err(invalid("no nonparametric rate for the scalar family")),
        Family::FracLaplacian => {
            let pe = (1.0 - alpha) / (1.0 + b);
            let first = t <= eps.powf(pe);
            let (rate, exponents, regime) = if first {
                let q = alpha / (2.0 * alpha + dd);
                let a = (dd + 2.0) / (2.0 + 2.0 * b);
                ((t * eps.powf(-a)).powf(-q), ExponentRecord { t: -q, eps: a * q, ..Default::default() }, Regime::ParametricScaling)
            } else {
                let q = alpha / (2.0 * alpha + 3.0 + 4.0 * b);
                let a = (5.0 + 4.0 * b) / (2.0 + 2.0 * b);
                ((t * eps.powf(-a)).powf(-q), ExponentRecord { t: -q, eps: a * q, ..Default::default() }, Regime::Ellbow)
            };
            let num = LogForm([5.0 + 5.0 * b, 5.0, 0.0, 0.0]);
            let den = LogForm([2.0 + 2.0 * b, 10.0 + 4.0 * b, 0.0, 0.0]);
            NonparametricRate {
                rate,
                exponents,
                regime,
                ellbow: EllbowThreshold { eps: pe, nu: 0.0 },
                validity: vec![
                    ValidityFlag::new("dimension_in_[1,6+8beta)", dd < 6.0 + 8.0 * b),
                    alpha_condition(alpha, num, den, &logs),
                ],
            }
        }
        Family::Transport => {
            let first = t <= eps.powf(-alpha) * nu.powf(1.0 - alpha);
            let (rate, exponents, regime) = if first {
                let q = alpha / (2.0 * alpha + dd);
                (
                    (eps.powf(dd / 2.0) * nu.powf((dd + 2.0) / 2.0) / t).powf(q),
                    ExponentRecord { t: -q, eps: dd / 2.0 * q, nu: (dd + 2.0) / 2.0 * q, ..Default::default() },
                    Regime::ParametricScaling,
                )
            } else {
                let q = alpha / (2.0 * alpha + 5.0);
                let r = alpha / (4.0 * alpha + 10.0);
                (
                    t.powf(-q) * eps.powf(5.0 * r) * nu.powf(7.0 * r),
                    ExponentRecord { t: -q, eps: 5.0 * r, nu: 7.0 * r, ..Default::default() },
                    Regime::Ellbow,
                )
            };
            NonparametricRate {
                rate,
                exponents,
                regime,
                ellbow: EllbowThreshold { eps: -alpha, nu: 1.0 - alpha },
                validity: vec![
                    ValidityFlag::new("dimension_in_[1,7]", d <= 7),
                    ValidityFlag::new("beta_zero", beta == 0.0),
                ],
            }
        }
        Family::Source => {
            let mut par_params = params;
            par_params.beta = 0.0;
            let par = parametric_rate(Family::Source, &par_params)?;
            let pe = par.exponents;
            let cut = (nu * eps).powf((2.0 * alpha + dd) / 4.0);
            let first = par.rate >= cut;
            let (rate, exponents, regime) = if first {
                let q = 2.0 * alpha / (2.0 * alpha + dd);
                (par.rate.powf(q), pe.scaled(q), Regime::ParametricScaling)
            } else if d <= 2 {
                let q = 2.0 * alpha / (2.0 * alpha + dd + 4.0);
                let mut e = pe;
                e.nu += 1.0;
                e.eps += 1.0;
                ((nu * eps * par.rate).powf(q), e.scaled(q), Regime::Ellbow)
            } else {
                let q = 2.0 * alpha / (2.0 * alpha + 7.0);
                let s = (7.0 - dd) / 4.0;
                let mut e = pe;
                e.nu += s;
                e.eps += s;
                (((nu * eps).powf(s) * par.rate).powf(q), e.scaled(q), Regime::Ellbow)
            };
            let (num, den) = source_alpha_forms(d, first);
            let small = dd.min(2.0);
            NonparametricRate {
                rate,
                exponents,
                regime,
                ellbow: EllbowThreshold { eps: -alpha - small / 2.0, nu: -alpha },
                validity: vec![
                    ValidityFlag::new("dimension_in_[1,9]", d <= 9),
                    ValidityFlag::new("beta_zero", beta == 0.0),
                    alpha_condition(alpha, num, den, &logs),
                ],
            }
        }
    })
}

fn source_alpha_forms(d: usize, first: bool) -> (LogForm, LogForm) {
    let dd = d as f64;
    match (first, d) {
        (true, 1) => (LogForm([1.0, -2.0 * dd, 0.0, 0.0]), LogForm([2.0, 4.0, dd + 1.0, 0.0])),
        (true, 2) => (LogForm([1.0, -2.0 * dd, 0.0, 1.0]), LogForm([2.0, 4.0, dd + 1.0, 2.0])),
        (true, _) => (LogForm([1.0, -(1.5 * dd + 1.0), 0.0, 0.0]), LogForm([2.0, dd + 2.0, dd + 1.0, 0.0])),
        (false, 1) => (LogForm([1.0, -(2.0 * dd + 6.0), 0.0, 0.0]), LogForm([2.0, 8.0, dd + 5.0, 0.0])),
        (false, 2) => (LogForm([1.0, -(2.0 * dd + 6.0), 0.0, 1.0]), LogForm([2.0, 8.0, dd + 5.0, 2.0])),
        (false, _) => (LogForm([1.0, -11.5, 0.0, 0.0]), LogForm([2.0, 9.0, 8.0, 0.0])),
    }
}
