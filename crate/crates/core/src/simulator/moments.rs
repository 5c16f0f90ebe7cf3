//! Exact one-step law of a mode and its time integral.

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Below this `|lambda * dt|` the closed forms lose digits to cancellation
/// and the moments are summed from their power series instead.
pub const SERIES_RADIUS: f64 = 0.5;

const SERIES_TERMS: usize = 40;

/// Transition and innovation covariance of `(x, integral of x)` over one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMoments {
    pub lambda: Complex64,
    pub dt: f64,
    /// `exp(lambda dt)`.
    pub decay: Complex64,
    /// `(exp(lambda dt) - 1) / lambda`, the weight of the previous state in the integral.
    pub phi: Complex64,
    pub var_state: f64,
    pub var_integral: f64,
    /// `E[x+ conj(I)]`.
    pub cov_state_integral: Complex64,
}

/// Lower Cholesky factor of the 2x2 innovation covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnovationFactor {
    pub l11: f64,
    pub l21: Complex64,
    pub l22: f64,
}

impl StepMoments {
    /// Transition of `(x, Y)` where `Y` is the running integral.
    pub fn transition(&self) -> [[Complex64; 2]; 2] {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        [[self.decay, zero], [self.phi, one]]
    }

    /// Hermitian innovation covariance `[[Var x, Cov], [conj Cov, Var I]]`.
    pub fn covariance(&self) -> [[Complex64; 2]; 2] {
        [
            [Complex64::new(self.var_state, 0.0), self.cov_state_integral],
            [self.cov_state_integral.conj(), Complex64::new(self.var_integral, 0.0)],
        ]
    }

    pub fn factor(&self) -> InnovationFactor {
        let l11 = self.var_state.sqrt();
        let l21 = self.cov_state_integral.conj() / l11;
        let l22 = (self.var_integral - l21.norm_sqr()).max(0.0).sqrt();
        InnovationFactor { l11, l21, l22 }
    }
}

/// `exp(z) - 1` without cancellation in the real part.
pub(crate) fn expm1_complex(z: Complex64) -> Complex64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * c - 2.0 * half * half, z.re.exp() * s)
}

/// Exact one-step moments for `dx = lambda x dt + dw` with `E|dw|^2 = dt`.
pub fn step_moments(lambda: Complex64, dt: f64) -> Result<StepMoments> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid(format!("dt = {dt} must be positive and finite")));
    }
    if !lambda.re.is_finite() || !lambda.im.is_finite() {
        return Err(invalid("lambda must be finite"));
    }
    if lambda.re > 0.0 {
        return Err(invalid(format!("Re(lambda) = {} must be nonpositive", lambda.re)));
    }
    let h = dt;
    let z = lambda * h;
    let r = lambda.re;
    let var_state = if r == 0.0 { h } else { (2.0 * r * h).exp_m1() / (2.0 * r) };
    let decay = z.exp();

    let (phi, cov, var_int) = if z.norm() < SERIES_RADIUS {
        series_moments(z, h)
    } else {
        let phi = expm1_complex(z) / lambda;
        let cov = (Complex64::new(var_state, 0.0) - phi) / lambda.conj();
        let var_int = (var_state - 2.0 * phi.re + h) / lambda.norm_sqr();
        (phi, cov, var_int)
    };

    Ok(StepMoments {
        lambda,
        dt,
        decay,
        phi,
        var_state,
        var_integral: var_int.max(0.0),
        cov_state_integral: cov,
    })
}

fn series_moments(z: Complex64, h: f64) -> (Complex64, Complex64, f64) {
    let zc = z.conj();
    let mut zp = [Complex64::new(1.0, 0.0); SERIES_TERMS + 1];
    let mut zcp = [Complex64::new(1.0, 0.0); SERIES_TERMS + 1];
    let mut fact = [1.0f64; SERIES_TERMS + 2];
    for k in 1..=SERIES_TERMS {
        zp[k] = zp[k - 1] * z;
        zcp[k] = zcp[k - 1] * zc;
    }
    for k in 1..fact.len() {
        fact[k] = fact[k - 1] * k as f64;
    }

    // phi = h * sum_k z^k / (k+1)!
    let mut phi = Complex64::new(0.0, 0.0);
    for k in (0..=SERIES_TERMS).rev() {
        phi += zp[k] / fact[k + 1];
    }
    phi *= h;

    // Double series from expanding both exponentials under the integral;
    // summed from the smallest terms up.
    let mut cov = Complex64::new(0.0, 0.0);
    let mut var = Complex64::new(0.0, 0.0);
    for total in (1..=SERIES_TERMS).rev() {
        for a in 0..total {
            let b = total - a;
            let denom = fact[a] * fact[b] * (total + 1) as f64;
            cov += zp[a] * zcp[b - 1] / denom;
            if a >= 1 {
                var += zp[a - 1] * zcp[b - 1] / denom;
            }
        }
    }
    (phi, cov * (h * h), var.re * h * h * h)
}
