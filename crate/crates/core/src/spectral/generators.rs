//! Eigenvalue generators and assemblers for the concrete model families.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{Design, ModeLabel, ModeSpec, SpectralModel};
use crate::error::{invalid, Error, Result};

/// Default cap on the number of stored torus representatives.
pub const DEFAULT_MODE_BUDGET: usize = 200_000;

const TWO_PI_SQ: f64 = 4.0 * PI * PI;

fn lattice_points(d: usize, k_lattice: u32, budget: usize) -> Result<Vec<Vec<i64>>> {
    if !(1..=3).contains(&d) {
        return Err(invalid(format!("torus dimension must be 1, 2 or 3, got {d}")));
    }
    let k = i64::from(k_lattice);
    let k2 = k * k;
    // Representatives: zero, or first nonzero coordinate positive.
    let is_rep = |p: &[i64]| p.iter().find(|&&c| c != 0).is_none_or(|&c| c > 0);
    let mut count = 0usize;
    let mut points = Vec::new();
    let mut p = vec![-k; d];
    loop {
        let norm2: i64 = p.iter().map(|c| c * c).sum();
        if norm2 <= k2 && is_rep(&p) {
            count += 1;
            if count > budget {
                // Finish counting so the error reports the full request.
                let requested = count_representatives(d, k);
                return Err(Error::ModeBudget { requested, budget });
            }
            points.push(p.clone());
        }
        // Odometer increment over [-k, k]^d.
        let mut axis = d;
        loop {
            if axis == 0 {
                return Ok(points);
            }
            axis -= 1;
            if p[axis] < k {
                p[axis] += 1;
                for q in p.iter_mut().skip(axis + 1) {
                    *q = -k;
                }
                break;
            }
        }
    }
}

fn count_representatives(d: usize, k: i64) -> usize {
    // Lattice points in the closed ball, folded by +-l symmetry.
    let k2 = k * k;
    let total: usize = match d {
        1 => (2 * k + 1) as usize,
        2 => (-k..=k)
            .map(|x| {
                let r = k2 - x * x;
                (2 * isqrt(r) + 1) as usize
            })
            .sum(),
        _ => (-k..=k)
            .flat_map(|x| (-k..=k).map(move |y| (x, y)))
            .filter(|(x, y)| x * x + y * y <= k2)
            .map(|(x, y)| (2 * isqrt(k2 - x * x - y * y) + 1) as usize)
            .sum(),
    };
    total.div_ceil(2)
}

fn isqrt(n: i64) -> i64 {
    let mut r = (n as f64).sqrt() as i64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Torus Laplacian eigenvalues `-(2 pi)^2 nu |l|^2` over one representative
/// per conjugate pair with `|l| <= K`, sorted by `|l|` then lexicographically.
///
/// `ell` and `b` are placeholders (0 and 1) to be filled by an assembler.
pub fn eigs_torus_laplacian(d: usize, nu: f64, k_lattice: u32) -> Result<Vec<ModeSpec>> {
    eigs_torus_laplacian_with_budget(d, nu, k_lattice, DEFAULT_MODE_BUDGET)
}

pub fn eigs_torus_laplacian_with_budget(d: usize, nu: f64, k_lattice: u32, budget: usize) -> Result<Vec<ModeSpec>> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(invalid(format!("nu = {nu} must be positive")));
    }
    let mut points = lattice_points(d, k_lattice, budget)?;
    points.sort_by(|a, b| {
        let na: i64 = a.iter().map(|c| c * c).sum();
        let nb: i64 = b.iter().map(|c| c * c).sum();
        na.cmp(&nb).then_with(|| a.cmp(b))
    });
    Ok(points
        .into_iter()
        .map(|p| {
            let norm2: i64 = p.iter().map(|c| c * c).sum();
            let mult = if norm2 == 0 { 1 } else { 2 };
            ModeSpec {
                m: Complex64::new(-TWO_PI_SQ * nu * norm2 as f64, 0.0),
                ell: Complex64::new(0.0, 0.0),
                b: 1.0,
                mult,
                label: ModeLabel::Lattice(p),
            }
        })
        .collect())
}

/// Weyl-law proxy magnitudes `c * k^(2/d)` for `k = 1..=K`.
pub fn eigs_weyl_proxy(d: usize, c: f64, k_max: u32) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(invalid(format!("weyl constant c = {c} must be positive")));
    }
    if k_max == 0 {
        return Err(invalid("K_max must be at least 1"));
    }
    let exponent = 2.0 / d as f64;
    Ok((1..=k_max).map(|k| c * f64::from(k).powf(exponent)).collect())
}

/// Weyl proxy magnitudes wrapped as placeholder modes with `m = -mu`, mult 1.
pub fn weyl_base_modes(d: usize, c: f64, k_max: u32) -> Result<Vec<ModeSpec>> {
    Ok(eigs_weyl_proxy(d, c, k_max)?
        .into_iter()
        .enumerate()
        .map(|(i, mu)| ModeSpec {
            m: Complex64::new(-mu, 0.0),
            ell: Complex64::new(0.0, 0.0),
            b: 1.0,
            mult: 1,
            label: ModeLabel::Index(i + 1),
        })
        .collect())
}

fn base_magnitude(mode: &ModeSpec) -> f64 {
    -mode.m.re
}

fn require_positive_theta(design: &Design, family: &str) -> Result<()> {
    if design.theta_lo <= 0.0 {
        return Err(invalid(format!("{family} requires theta_lo > 0, got {}", design.theta_lo)));
    }
    Ok(())
}

/// Fractional heat equation: `m = 0`, `ell = -mu^rho`, `b = (1 + mu^rho)^-beta`.
pub fn model_fractional_laplacian(
    d: usize,
    rho: f64,
    beta: f64,
    base: &[ModeSpec],
    design: Design,
) -> Result<SpectralModel> {
    require_positive_theta(&design, "frac_laplacian")?;
    if !(rho > 0.0) || !(beta >= 0.0) {
        return Err(invalid(format!("need rho > 0 and beta >= 0, got rho = {rho}, beta = {beta}")));
    }
    let modes = base
        .iter()
        .map(|base| {
            let power = base_magnitude(base).powf(rho);
            ModeSpec {
                m: Complex64::new(0.0, 0.0),
                ell: Complex64::new(-power, 0.0),
                b: (1.0 + power).powf(-beta),
                mult: base.mult,
                label: base.label.clone(),
            }
        })
        .collect();
    SpectralModel::new(modes, design, d, format!("frac_laplacian d={d} rho={rho} beta={beta}"))
}

/// Advection-diffusion on the unit torus with unknown transport speed.
pub fn model_transport(d: usize, nu: f64, xi: &[f64], beta: f64, k_lattice: u32, design: Design) -> Result<SpectralModel> {
    if xi.len() != d {
        return Err(invalid(format!("xi has length {}, expected {d}", xi.len())));
    }
    if xi.iter().all(|&x| x == 0.0) {
        return Err(invalid("xi must be nonzero"));
    }
    if !(beta >= 0.0) {
        return Err(invalid("beta must be nonnegative"));
    }
    let base = eigs_torus_laplacian(d, nu, k_lattice)?;
    let modes = base
        .into_iter()
        .map(|mode| {
            let ModeLabel::Lattice(ref p) = mode.label else { unreachable!("torus modes carry lattice labels") };
            let norm2: f64 = p.iter().map(|&c| (c * c) as f64).sum();
            let dot: f64 = p.iter().zip(xi).map(|(&c, &x)| c as f64 * x).sum();
            ModeSpec {
                ell: Complex64::new(0.0, 2.0 * PI * dot),
                b: (1.0 + TWO_PI_SQ * norm2).powf(-beta),
                ..mode
            }
        })
        .collect();
    SpectralModel::new(modes, design, d, format!("transport d={d} nu={nu} beta={beta}"))
}

/// Reaction-diffusion with unknown reaction rate: `m = -nu mu`, `ell = -1`.
pub fn model_source(d: usize, nu: f64, beta: f64, base: &[ModeSpec], design: Design) -> Result<SpectralModel> {
    require_positive_theta(&design, "source")?;
    if !(nu > 0.0) || !(beta >= 0.0) {
        return Err(invalid(format!("need nu > 0 and beta >= 0, got nu = {nu}, beta = {beta}")));
    }
    let modes = base
        .iter()
        .map(|base| {
            let scaled = nu * base_magnitude(base);
            ModeSpec {
                m: Complex64::new(-scaled, 0.0),
                ell: Complex64::new(-1.0, 0.0),
                b: (1.0 + scaled).powf(-beta),
                mult: base.mult,
                label: base.label.clone(),
            }
        })
        .collect();
    SpectralModel::new(modes, design, d, format!("source d={d} nu={nu} beta={beta}"))
}

/// Scalar Ornstein-Uhlenbeck state with volatility `sigma`.
pub fn model_ou(sigma: f64, design: Design) -> Result<SpectralModel> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("sigma = {sigma} must be positive")));
    }
    let mode = ModeSpec {
        m: Complex64::new(0.0, 0.0),
        ell: Complex64::new(-1.0, 0.0),
        b: sigma,
        mult: 1,
        label: ModeLabel::Index(0),
    };
    let mut model = SpectralModel::new(vec![mode], design, 1, format!("ou sigma={sigma}"))?;
    model.finite_dimensional = true;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_small_lattices() {
        let modes = eigs_torus_laplacian(1, 1.0, 1).unwrap();
        assert_eq!(modes.len(), 2);
        assert_eq!((modes[0].m.re, modes[0].mult), (0.0, 1));
        assert_eq!(modes[1].mult, 2);
        assert!((modes[1].m.re + TWO_PI_SQ).abs() < 1e-12);

        let modes = eigs_torus_laplacian(2, 1.0, 2).unwrap();
        let diag = modes.iter().find(|m| m.label == ModeLabel::Lattice(vec![1, 1])).unwrap();
        assert!((diag.m.re + 8.0 * PI * PI).abs() < 1e-12);

        let modes = eigs_torus_laplacian(1, 0.5, 2).unwrap();
        assert!((modes[2].m.re + 8.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn torus_budget_and_dimension() {
        assert!(eigs_torus_laplacian(4, 1.0, 2).is_err());
        let err = eigs_torus_laplacian_with_budget(2, 1.0, 10, 20).unwrap_err();
        match err {
            Error::ModeBudget { requested, budget } => {
                assert_eq!(budget, 20);
                assert_eq!(requested, count_representatives(2, 10));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn weyl_examples() {
        assert_eq!(eigs_weyl_proxy(1, 1.0, 3).unwrap()[2], 9.0);
        assert_eq!(eigs_weyl_proxy(2, 1.0, 4).unwrap()[3], 4.0);
        assert!((eigs_weyl_proxy(4, 2.0, 16).unwrap()[15] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn assembler_examples() {
        let design = Design::new(0.1, 1.0, 0.5, 1.0);
        let base = vec![ModeSpec { m: Complex64::new(-4.0 * PI * PI, 0.0), ..weyl_base_modes(1, 1.0, 1).unwrap()[0].clone() }];
        let heat = model_fractional_laplacian(1, 1.0, 0.0, &base, design).unwrap();
        assert!((heat.modes[0].ell.re + 4.0 * PI * PI).abs() < 1e-12);
        assert_eq!(heat.modes[0].b, 1.0);

        let unit = vec![ModeSpec { m: Complex64::new(-1.0, 0.0), ..base[0].clone() }];
        assert_eq!(model_fractional_laplacian(1, 1.0, 1.0, &unit, design).unwrap().modes[0].b, 0.5);
        let sixteen = vec![ModeSpec { m: Complex64::new(-16.0, 0.0), ..base[0].clone() }];
        assert_eq!(model_fractional_laplacian(1, 0.5, 0.0, &sixteen, design).unwrap().modes[0].ell.re, -4.0);

        let source = model_source(1, 1.0, 0.0, &base, design).unwrap();
        assert!((source.modes[0].m.re + 4.0 * PI * PI).abs() < 1e-12);
        assert_eq!(source.modes[0].ell.re, -1.0);
        let three = vec![ModeSpec { m: Complex64::new(-3.0, 0.0), ..base[0].clone() }];
        assert_eq!(model_source(1, 1.0, 1.0, &three, design).unwrap().modes[0].b, 0.25);

        assert!(model_source(1, 1.0, 0.0, &base, Design::new(0.1, 1.0, 0.0, 1.0)).is_err());
        assert!(model_fractional_laplacian(1, 1.0, 0.0, &base, Design::new(0.1, 1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn transport_modes() {
        let model = model_transport(1, 1.0, &[1.0], 0.0, 2, Design::new(0.1, 1.0, -1.0, 2.0)).unwrap();
        let one = &model.modes[1];
        let lam = one.lambda(2.0);
        assert!((lam.re + 4.0 * PI * PI).abs() < 1e-12);
        assert!((lam.im - 4.0 * PI).abs() < 1e-12);
        assert_eq!(model.modes[0].ell, Complex64::new(0.0, 0.0));

        let model = model_transport(2, 1.0, &[1.0, 0.0], 0.0, 3, Design::new(0.1, 1.0, 0.0, 1.0)).unwrap();
        let m = model.modes.iter().find(|m| m.label == ModeLabel::Lattice(vec![0, 3])).unwrap();
        assert_eq!(m.ell.im, 0.0);
        assert!((m.m.re + 36.0 * PI * PI).abs() < 1e-9);
    }

    #[test]
    fn ou_single_mode() {
        let model = model_ou(1.0, Design::new(0.0, 1.0, 0.0, 2.0)).unwrap();
        assert_eq!(model.modes.len(), 1);
        assert_eq!(model.modes[0].ell.re, -1.0);
        assert!(model.finite_dimensional);
    }
}
