//! Serializable model description.

use serde::{Deserialize, Serialize};

use super::{
    eigs_torus_laplacian, model_fractional_laplacian, model_ou, model_source, model_transport, weyl_base_modes, Design,
    ModeSpec, SpectralModel,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ou,
    FracLaplacian,
    Transport,
    Source,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Ou => "ou",
            Family::FracLaplacian => "frac_laplacian",
            Family::Transport => "transport",
            Family::Source => "source",
        }
    }
}

/// Text form of a model. Unused keys are omitted on output.
///
/// For `frac_laplacian` the optional `nu` scales the base torus Laplacian
/// (a torus of side `nu^-1/2`); for `transport` and `source` it is the
/// diffusivity. Base eigenvalues come from the torus when `K_lattice` is
/// set and from the Weyl proxy `weyl_c * k^(2/d)` when `K_max` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default = "one_usize")]
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub eps: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    #[serde(rename = "K_lattice", default, skip_serializing_if = "Option::is_none")]
    pub k_lattice: Option<u32>,
    #[serde(rename = "K_max", default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weyl_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_c: Option<f64>,
}

fn one_usize() -> usize {
    1
}

impl ModelSpec {
    /// Minimal spec for a family; optional keys left unset.
    pub fn new(family: Family, eps: f64, horizon: f64, theta_lo: f64, theta_hi: f64) -> Self {
        Self {
            family,
            d: 1,
            nu: None,
            beta: None,
            rho: None,
            xi: None,
            sigma: None,
            eps,
            horizon,
            theta_lo,
            theta_hi,
            k_lattice: None,
            k_max: None,
            weyl_c: None,
            domain_c: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    fn design(&self) -> Design {
        let design = Design::new(self.eps, self.horizon, self.theta_lo, self.theta_hi);
        match self.domain_c {
            Some(c) => design.with_domain_constant(c),
            None => design,
        }
    }

    fn base_modes(&self, torus_scale: f64) -> Result<Vec<ModeSpec>> {
        match (self.k_lattice, self.k_max) {
            (Some(k), None) => eigs_torus_laplacian(self.d, torus_scale, k),
            (None, Some(k)) => weyl_base_modes(self.d, self.weyl_c.unwrap_or(1.0), k),
            (Some(_), Some(_)) => Err(Error::Config("set only one of K_lattice and K_max".into())),
            (None, None) => Err(Error::Config(format!("{} needs K_lattice or K_max", self.family.as_str()))),
        }
    }

    fn required(&self, value: Option<f64>, key: &str) -> Result<f64> {
        value.ok_or_else(|| Error::Config(format!("{} needs key `{key}`", self.family.as_str())))
    }

    /// Builds the spectral model described by this spec.
    pub fn build(&self) -> Result<SpectralModel> {
        let design = self.design();
        let beta = self.beta.unwrap_or(0.0);
        let mut model = match self.family {
            Family::Ou => model_ou(self.sigma.unwrap_or(1.0), design)?,
            Family::FracLaplacian => {
                let base = self.base_modes(self.nu.unwrap_or(1.0))?;
                model_fractional_laplacian(self.d, self.rho.unwrap_or(1.0), beta, &base, design)?
            }
            Family::Transport => {
                let nu = self.required(self.nu, "nu")?;
                let xi = self.xi.clone().ok_or_else(|| Error::Config("transport needs key `xi`".into()))?;
                let k = self.k_lattice.ok_or_else(|| Error::Config("transport needs K_lattice".into()))?;
                model_transport(self.d, nu, &xi, beta, k, design)?
            }
            Family::Source => {
                let nu = self.required(self.nu, "nu")?;
                let base = self.base_modes(1.0)?;
                model_source(self.d, nu, beta, &base, design)?
            }
        };
        model.spec = Some(self.clone());
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_build() {
        let mut spec = ModelSpec::new(Family::Transport, 0.1, 10.0, -1.0, 1.0);
        spec.d = 2;
        spec.nu = Some(0.5);
        spec.xi = Some(vec![1.0, 0.25]);
        spec.k_lattice = Some(3);
        let text = spec.to_toml().unwrap();
        assert!(text.contains("K_lattice = 3"));
        assert!(text.contains("T = 10.0"));
        let back = ModelSpec::from_toml(&text).unwrap();
        assert_eq!(back, spec);
        let model = back.build().unwrap();
        assert_eq!(model.spec.as_ref(), Some(&spec));
    }

    #[test]
    fn rejects_unknown_keys_and_missing_bases() {
        assert!(ModelSpec::from_toml("family = \"ou\"\neps = 0.0\nT = 1.0\ntheta_lo = 0.0\ntheta_hi = 1.0\nfoo = 1").is_err());
        let spec = ModelSpec::new(Family::Source, 0.0, 1.0, 0.5, 1.0);
        assert!(matches!(spec.build(), Err(Error::Config(_))));
    }
}
