use std::collections::HashSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use spdenoise::spectral::*;
use spdenoise::Error;

fn lattice_count(d: usize, k: i64) -> usize {
    let range = || -k..=k;
    match d {
        1 => range().count(),
        2 => range().flat_map(|x| range().map(move |y| x * x + y * y)).filter(|&n| n <= k * k).count(),
        _ => range()
            .flat_map(|x| range().flat_map(move |y| range().map(move |z| x * x + y * y + z * z)))
            .filter(|&n| n <= k * k)
            .count(),
    }
}

#[test]
fn torus_counts_match_lattice() {
    for k in [1u32, 4, 17] {
        assert_eq!(eigs_torus_laplacian(1, 1.0, k).unwrap().len(), k as usize + 1);
    }
    for d in 1..=3 {
        for k in [1u32, 3, 6] {
            let modes = eigs_torus_laplacian(d, 0.7, k).unwrap();
            let real_dim: usize = modes.iter().map(|m| m.mult as usize).sum();
            assert_eq!(real_dim, lattice_count(d, i64::from(k)), "d = {d}, K = {k}");
            assert_eq!(modes.iter().filter(|m| m.mult == 1).count(), 1);
        }
    }
}

#[test]
fn torus_ordering_and_labels() {
    let modes = eigs_torus_laplacian(2, 1.0, 5).unwrap();
    let mags: Vec<f64> = modes.iter().map(|m| -m.m.re).collect();
    assert!(mags.windows(2).all(|w| w[0] <= w[1]));
    let labels: HashSet<String> = modes.iter().map(|m| format!("{:?}", m.label)).collect();
    assert_eq!(labels.len(), modes.len());
    let one_one = modes.iter().find(|m| matches!(&m.label, ModeLabel::Lattice(l) if l == &vec![1, 1])).unwrap();
    assert!((one_one.m.re + 8.0 * PI * PI).abs() < 1e-12);
}

#[test]
fn rejects_bad_dimensions_and_budget() {
    assert!(eigs_torus_laplacian(4, 1.0, 2).is_err());
    assert!(eigs_torus_laplacian(0, 1.0, 2).is_err());
    assert!(matches!(eigs_torus_laplacian_with_budget(3, 1.0, 20, 100), Err(Error::ModeBudget { .. })));
}

#[test]
fn family_examples() {
    let design = Design::new(0.1, 10.0, 0.5, 2.0);
    let model = model_transport(1, 1.0, &[1.0], 0.0, 1, design).unwrap();
    let lam = assemble_lambda(&model, 2.0).unwrap();
    let target = Complex64::new(-4.0 * PI * PI, 4.0 * PI);
    assert!((lam[1].lambda - target).norm() < 1e-12);
    assert_eq!(model.modes[0].ell, Complex64::new(0.0, 0.0));

    let base = weyl_base_modes(1, 1.0, 3).unwrap();
    let source = model_source(1, 1.0, 1.0, &base, design).unwrap();
    assert!(source.modes.iter().all(|m| m.ell == Complex64::new(-1.0, 0.0)));
    assert!((source.modes[0].b - 0.5).abs() < 1e-15);

    let design0 = Design::new(0.0, 10.0, 0.0, 1.0);
    let ou = model_ou(1.0, design0).unwrap();
    assert_eq!(assemble_lambda(&ou, 0.0).unwrap()[0].lambda, Complex64::new(0.0, 0.0));
    assert!(assemble_lambda(&ou, 1.5).is_err());
}

#[test]
fn negative_transport_range_is_allowed() {
    let model = model_transport(2, 0.3, &[1.0, -0.5], 0.5, 3, Design::new(0.2, 5.0, -2.0, 2.0)).unwrap();
    for theta in [-2.0, 0.0, 2.0] {
        assert!(assemble_lambda(&model, theta).unwrap().iter().all(|l| l.re <= 0.0));
    }
}

#[test]
fn fractional_requires_positive_range() {
    let base = weyl_base_modes(1, 1.0, 4).unwrap();
    assert!(model_fractional_laplacian(1, 1.0, 0.0, &base, Design::new(0.1, 2.0, 0.0, 1.0)).is_err());
    assert!(model_source(1, 1.0, 0.0, &base, Design::new(0.1, 2.0, -0.1, 1.0)).is_err());
}

fn arb_family() -> impl Strategy<Value = ModelSpec> {
    let design = (0.0f64..=1.0, 1.0f64..100.0, 0.05f64..1.0, 0.1f64..2.0);
    (0usize..4, 1usize..=3, 0.01f64..2.0, 0.0f64..2.0, 0.25f64..2.0, 1u32..6, design).prop_map(
        |(family, d, nu, beta, rho, k, (eps, t, lo, width))| {
            let fam = [Family::Ou, Family::FracLaplacian, Family::Transport, Family::Source][family];
            let mut spec = ModelSpec::new(fam, eps, t, lo, lo + width);
            match fam {
                Family::Ou => spec.sigma = Some(0.5 + nu),
                Family::FracLaplacian => {
                    spec.d = d;
                    spec.rho = Some(rho);
                    spec.beta = Some(beta);
                    spec.k_lattice = Some(k);
                }
                Family::Transport => {
                    spec.d = d;
                    spec.nu = Some(nu);
                    spec.beta = Some(beta);
                    spec.xi = Some((0..d).map(|i| 1.0 / (1.0 + i as f64)).collect());
                    spec.k_lattice = Some(k);
                    // Small nu leaves |Im| far above the default domain constant.
                    spec.domain_c = Some(1e6);
                }
                Family::Source => {
                    spec.d = d;
                    spec.nu = Some(nu);
                    spec.beta = Some(beta);
                    spec.k_max = Some(4 * k);
                    spec.weyl_c = Some(rho);
                }
            }
            spec
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn clip_reciprocity(a in prop_oneof![Just(0.0f64), 0.0f64..1e6], p in 0.01f64..6.0, t in 1e-3f64..1e4) {
        let prod = clip_inv(a, p, t) * clip_low(a, p, t);
        prop_assert!((prod - 1.0).abs() < 1e-12, "product {}", prod);
    }

    #[test]
    fn clip_monotone(a in 0.0f64..1e3, da in 0.0f64..1e3, p in 0.01f64..4.0, t in 1.0f64..1e3, dt in 0.0f64..1e3) {
        prop_assert!(clip_inv(a + da, p, t) <= clip_inv(a, p, t));
        prop_assert!(clip_inv(a, p, t) <= clip_inv(a, p, t + dt));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_models_keep_mode_invariants(spec in arb_family(), u in 0.0f64..=1.0) {
        let model = spec.build().unwrap();
        let theta = model.theta_lo + u * (model.theta_hi - model.theta_lo);
        for lam in assemble_lambda(&model, theta).unwrap() {
            prop_assert!(lam.re <= 0.0);
        }
        for mode in &model.modes {
            prop_assert_eq!(mode.m.im, 0.0);
            prop_assert!(mode.m.re <= 0.0 && mode.ell.re <= 0.0 && mode.b > 0.0);
            prop_assert!(mode.mult == 1 || mode.mult == 2);
        }
    }

    #[test]
    fn spec_round_trip(spec in arb_family()) {
        let text = spec.to_toml().unwrap();
        prop_assert_eq!(ModelSpec::from_toml(&text).unwrap(), spec);
    }

    #[test]
    fn eigenvalues_affine_in_theta(spec in arb_family(), u0 in 0.0f64..=1.0, u1 in 0.0f64..=1.0) {
        let model = spec.build().unwrap();
        let span = model.theta_hi - model.theta_lo;
        let (t0, t1) = (model.theta_lo + u0 * span, model.theta_lo + u1 * span);
        let l0 = assemble_lambda(&model, t0).unwrap();
        let l1 = assemble_lambda(&model, t1).unwrap();
        for ((a, b), mode) in l0.iter().zip(&l1).zip(&model.modes) {
            let diff = b.lambda - a.lambda - mode.ell * (t1 - t0);
            // Rounding of the two sums m + theta ell only.
            let scale = mode.m.norm() + (t0.abs() + t1.abs()) * mode.ell.norm();
            prop_assert!(diff.norm() <= 4.0 * f64::EPSILON * scale);
        }
    }
}

#[test]
fn domain_constant_from_text_applies_during_assembly() {
    let mut spec = ModelSpec::new(Family::Transport, 0.1, 2.0, 1.0, 2.0);
    spec.nu = Some(0.001);
    spec.xi = Some(vec![1.0]);
    spec.k_lattice = Some(3);
    assert!(matches!(spec.build(), Err(Error::DomainCondition { .. })));
    spec.domain_c = Some(100.0);
    assert_eq!(spec.build().unwrap().domain_c, 100.0);
}
