//! Diagonal representation of the drift family `A(theta) = M + theta * L`
//! and the noise operator, one complex representative per real eigenspace.
//!
//! Every mode carries a real multiplicity: a conjugate pair of lattice
//! frequencies is stored once with `mult = 2`, a self-conjugate mode with
//! `mult = 1`. All trace sums downstream are weighted by `mult`, and the
//! real inner product over a stored mode is `mult * Re(conj(u) * v)`.

mod generators;
mod spec;

pub use generators::{
    eigs_torus_laplacian, eigs_torus_laplacian_with_budget, eigs_weyl_proxy, model_fractional_laplacian,
    model_ou, model_source, model_transport, weyl_base_modes, DEFAULT_MODE_BUDGET,
};
pub use spec::{Family, ModelSpec};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clipped inverse power `min(|a|^-p, T^p)`, equal to `T^p` at `a = 0`.
///
/// The branch is selected on `|a| * T <= 1` so that [`clip_low`] takes the
/// mirrored branch for the same input.
pub fn clip_inv(a_abs: f64, p: f64, horizon: f64) -> f64 {
    let a = a_abs.abs();
    if a * horizon <= 1.0 {
        horizon.powf(p)
    } else {
        a.powf(-p)
    }
}

/// Clipped power `max(|a|^p, T^-p)`.
pub fn clip_low(a_abs: f64, p: f64, horizon: f64) -> f64 {
    let a = a_abs.abs();
    if a * horizon <= 1.0 {
        horizon.powf(-p)
    } else {
        a.powf(p)
    }
}

/// Opaque identifier attached to a mode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeLabel {
    Lattice(Vec<i64>),
    Index(usize),
    Unlabelled,
}

/// One eigendirection shared by `M`, `L` and `B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    /// Eigenvalue of `M` (real, nonpositive).
    pub m: Complex64,
    /// Eigenvalue of `L`.
    pub ell: Complex64,
    /// Eigenvalue of the noise operator.
    pub b: f64,
    /// Real multiplicity, 1 or 2.
    pub mult: u8,
    pub label: ModeLabel,
}

impl ModeSpec {
    pub fn new(m: Complex64, ell: Complex64, b: f64, mult: u8, label: ModeLabel) -> Self {
        Self { m, ell, b, mult, label }
    }

    #[inline]
    pub fn lambda(&self, theta: f64) -> Complex64 {
        self.m + self.ell * theta
    }

    #[inline]
    pub fn weight(&self) -> f64 {
        f64::from(self.mult)
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |reason: &str| Error::InvalidMode { index, reason: reason.to_string() };
        let finite = self.m.re.is_finite()
            && self.m.im.is_finite()
            && self.ell.re.is_finite()
            && self.ell.im.is_finite()
            && self.b.is_finite();
        if !finite {
            return Err(bad("non-finite entry"));
        }
        if self.m.im != 0.0 {
            return Err(bad("m must be real"));
        }
        if self.m.re > 0.0 {
            return Err(bad("m must be nonpositive"));
        }
        if self.ell.re > 0.0 {
            return Err(bad("Re(ell) must be nonpositive"));
        }
        if self.b <= 0.0 {
            return Err(bad("b must be positive"));
        }
        match self.mult {
            1 if self.ell.im != 0.0 => Err(bad("a mult = 1 mode must have real ell")),
            1 | 2 => Ok(()),
            _ => Err(bad("mult must be 1 or 2")),
        }
    }
}

/// Eigenvalue of one mode at a given parameter value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeLambda {
    pub lambda: Complex64,
    pub re: f64,
    pub im: f64,
}

/// Diagonal model together with the observation design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub modes: Vec<ModeSpec>,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub eps: f64,
    pub horizon: f64,
    pub dim: usize,
    /// Constant of the domain check `|Im| <= C (1 + |Re|)`.
    pub domain_c: f64,
    /// True when the model is an exact finite-dimensional system, so no
    /// spectral tail was dropped.
    pub finite_dimensional: bool,
    pub meta: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ModelSpec>,
}

/// Observation design shared by the model assemblers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Design {
    pub eps: f64,
    pub horizon: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    /// Constant of the domain check, [`DEFAULT_DOMAIN_C`] unless changed.
    pub domain_c: f64,
}

impl Design {
    pub fn new(eps: f64, horizon: f64, theta_lo: f64, theta_hi: f64) -> Self {
        Self { eps, horizon, theta_lo, theta_hi, domain_c: DEFAULT_DOMAIN_C }
    }

    pub fn with_domain_constant(mut self, c: f64) -> Self {
        self.domain_c = c;
        self
    }
}

pub const DEFAULT_DOMAIN_C: f64 = 10.0;

impl SpectralModel {
    /// Validates and assembles a model.
    pub fn new(modes: Vec<ModeSpec>, design: Design, dim: usize, meta: impl Into<String>) -> Result<Self> {
        Self::with_domain_constant(modes, design, dim, design.domain_c, meta)
    }

    pub fn with_domain_constant(
        modes: Vec<ModeSpec>,
        design: Design,
        dim: usize,
        domain_c: f64,
        meta: impl Into<String>,
    ) -> Result<Self> {
        let model = Self {
            modes,
            theta_lo: design.theta_lo,
            theta_hi: design.theta_hi,
            eps: design.eps,
            horizon: design.horizon,
            dim,
            domain_c,
            finite_dimensional: false,
            meta: meta.into(),
            spec: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::invalid;
        if self.modes.is_empty() {
            return Err(invalid("model has no modes"));
        }
        if !(self.theta_lo.is_finite() && self.theta_hi.is_finite()) || self.theta_hi <= self.theta_lo {
            return Err(invalid(format!(
                "theta range [{}, {}] must be finite with theta_hi > theta_lo",
                self.theta_lo, self.theta_hi
            )));
        }
        if !(0.0..=1.0).contains(&self.eps) {
            return Err(invalid(format!("eps = {} must lie in [0, 1]", self.eps)));
        }
        if !(self.horizon >= 1.0) || !self.horizon.is_finite() {
            return Err(invalid(format!("T = {} must be finite and at least 1", self.horizon)));
        }
        if self.dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if !(self.domain_c > 0.0) {
            return Err(invalid("domain constant must be positive"));
        }
        for (index, mode) in self.modes.iter().enumerate() {
            mode.validate(index)?;
        }
        // Affine in theta, so the endpoints decide contractivity.
        for theta in [self.theta_lo, self.theta_hi] {
            for (index, mode) in self.modes.iter().enumerate() {
                let lam = mode.lambda(theta);
                if lam.re > 0.0 {
                    return Err(Error::NotContractive { index, theta, re: lam.re });
                }
                let bound = self.domain_c * (1.0 + lam.re.abs());
                if lam.im.abs() > bound {
                    return Err(Error::DomainCondition { index, theta, im: lam.im.abs(), bound });
                }
            }
        }
        Ok(())
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Total real dimension, the sum of multiplicities.
    pub fn real_dimension(&self) -> usize {
        self.modes.iter().map(|m| usize::from(m.mult)).sum()
    }

    pub fn contains_theta(&self, theta: f64) -> bool {
        theta >= self.theta_lo && theta <= self.theta_hi
    }

    /// Eigenvalue at the upper end of the parameter range, used by the kernel.
    pub fn lambda_bar(&self, k: usize) -> Complex64 {
        self.modes[k].lambda(self.theta_hi)
    }

    /// Largest `|lambda|` over the modes at `theta_hi`.
    pub fn max_abs_lambda_bar(&self) -> f64 {
        self.modes.iter().map(|m| m.lambda(self.theta_hi).norm()).fold(0.0, f64::max)
    }

    /// Copy of the model with a different noise level or horizon.
    pub fn with_design(&self, eps: f64, horizon: f64) -> Result<Self> {
        let mut out = self.clone();
        out.eps = eps;
        out.horizon = horizon;
        if let Some(spec) = out.spec.as_mut() {
            spec.eps = eps;
            spec.horizon = horizon;
        }
        out.validate()?;
        Ok(out)
    }
}

/// Eigenvalues `lambda_k = m_k + theta * ell_k` with real and imaginary parts.
pub fn assemble_lambda(model: &SpectralModel, theta: f64) -> Result<Vec<ModeLambda>> {
    if !model.contains_theta(theta) {
        return Err(crate::error::invalid(format!(
            "theta = {theta} outside [{}, {}]",
            model.theta_lo, model.theta_hi
        )));
    }
    model
        .modes
        .iter()
        .enumerate()
        .map(|(index, mode)| {
            let lambda = mode.lambda(theta);
            if lambda.re > 0.0 {
                return Err(Error::NotContractive { index, theta, re: lambda.re });
            }
            Ok(ModeLambda { lambda, re: lambda.re, im: lambda.im })
        })
        .collect()
}
