use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use spdenoise::estimator::*;
use spdenoise::oracle::quadratic_form_moments;
use spdenoise::simulator::{rng::replicate_seed, simulate_observations, ObservationRecord, TimeGrid};
use spdenoise::spectral::*;
use spdenoise::Error;

fn ou(eps: f64, horizon: f64) -> Arc<SpectralModel> {
    Arc::new(model_ou(1.0, Design::new(eps, horizon, 0.5, 1.5)).unwrap())
}

fn heat(eps: f64, horizon: f64, k: u32) -> Arc<SpectralModel> {
    let mut spec = ModelSpec::new(Family::FracLaplacian, eps, horizon, 0.5, 1.5);
    spec.nu = Some(0.01);
    spec.rho = Some(1.0);
    spec.k_lattice = Some(k);
    Arc::new(spec.build().unwrap())
}

fn rmse(model: &Arc<SpectralModel>, n_steps: usize, reps: u64, master: u64) -> f64 {
    let grid = TimeGrid::new(model.horizon, n_steps).unwrap();
    let sq: f64 = (0..reps)
        .map(|r| {
            let rec = simulate_observations(model, 1.0, grid, replicate_seed(master, r)).unwrap();
            (estimate(model, &rec).unwrap().theta_hat - 1.0).powi(2)
        })
        .sum();
    (sq / reps as f64).sqrt()
}

#[test]
fn homogeneous_in_the_data() {
    let model = heat(0.2, 20.0, 6);
    let grid = TimeGrid::new(20.0, 2000).unwrap();
    let rec = simulate_observations(&model, 1.1, grid, 5).unwrap();
    let base = estimate(&model, &rec).unwrap();
    for c in [0.25, 2.0, 1024.0, -2.0] {
        let r = estimate(&model, &rec.scaled(c)).unwrap();
        assert_eq!(r.theta_hat, base.theta_hat);
        assert_eq!(r.n, base.n * c * c);
        assert_eq!(r.degenerate, base.degenerate);
    }
    // Z cancels against the lagged sum, so other scalings agree to rounding only.
    for c in [0.3, 7.0, -0.6] {
        let r = estimate(&model, &rec.scaled(c)).unwrap();
        assert!((r.theta_hat - base.theta_hat).abs() <= 1e-11 * base.theta_hat.abs());
        assert!((r.n / (base.n * c * c) - 1.0).abs() <= 1e-12);
        assert_eq!(r.degenerate, base.degenerate);
    }
}

#[test]
fn zero_record_is_degenerate() {
    let model = ou(0.1, 10.0);
    let grid = TimeGrid::new(10.0, 100).unwrap();
    let mut rec = simulate_observations(&model, 1.0, grid, 0).unwrap();
    rec.dy = vec![vec![Complex64::new(0.0, 0.0); 100]];
    let r = estimate(&model, &rec).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.n, 0.0);
    assert_eq!(r.theta_hat, 0.0);
}

#[test]
fn constant_modes_are_skipped() {
    // The zero Fourier mode of a transport model has ell = 0 and contributes nothing.
    let mut spec = ModelSpec::new(Family::Transport, 0.1, 5.0, 0.5, 1.5);
    spec.nu = Some(0.1);
    spec.xi = Some(vec![1.0]);
    spec.k_lattice = Some(3);
    let model = Arc::new(spec.build().unwrap());
    let rec = simulate_observations(&model, 1.0, TimeGrid::new(5.0, 500).unwrap(), 9).unwrap();
    let r = estimate(&model, &rec).unwrap();
    assert_eq!(r.per_mode_n[0], 0.0);
    assert!(r.per_mode_n[1..].iter().all(|&n| n != 0.0));
}

#[test]
fn summation_strategies_agree() {
    let model = heat(0.1, 10.0, 5);
    let grid = TimeGrid::new(10.0, 4000).unwrap();
    let rec = simulate_observations(&model, 0.8, grid, 3).unwrap();
    let with = |summation| estimate_with(&model, &rec, &EstimatorOptions { summation, ..Default::default() }).unwrap();
    let direct = with(Summation::Direct);
    let pruned = with(Summation::Pruned);
    assert_eq!(direct, pruned);
    let running = with(Summation::Running);
    assert!((running.theta_hat - direct.theta_hat).abs() < 1e-9 * direct.theta_hat.abs());
    assert!((running.n - direct.n).abs() < 1e-9 * direct.n.abs());
    let auto = with(Summation::Auto);
    assert!((auto.theta_hat - direct.theta_hat).abs() < 1e-9 * direct.theta_hat.abs());
}

#[test]
fn longer_horizon_reduces_error() {
    let short = ou(0.2, 100.0);
    let long = ou(0.2, 400.0);
    let e_short = rmse(&short, 2000, 60, 1);
    let e_long = rmse(&long, 8000, 60, 1);
    assert!(e_long < e_short, "T = 400: {e_long}, T = 100: {e_short}");
}

#[test]
fn denominator_concentrates() {
    let spread = |horizon: f64| {
        let model = ou(0.2, horizon);
        let grid = TimeGrid::new(horizon, (horizon * 20.0) as usize).unwrap();
        let ns: Vec<f64> = (0..60)
            .map(|r| estimate(&model, &simulate_observations(&model, 1.0, grid, replicate_seed(4, r)).unwrap()).unwrap().n)
            .collect();
        let mean = ns.iter().sum::<f64>() / ns.len() as f64;
        let var = ns.iter().map(|n| (n - mean).powi(2)).sum::<f64>() / (ns.len() - 1) as f64;
        var.sqrt() / mean
    };
    let (cv_short, cv_long) = (spread(50.0), spread(400.0));
    assert!(cv_long < 0.6 * cv_short, "cv {cv_short} -> {cv_long}");
}

#[test]
fn stable_under_coarsening() {
    let model = ou(0.2, 200.0);
    let grid = TimeGrid::new(200.0, 8000).unwrap();
    let mut diffs = Vec::new();
    let mut errs = Vec::new();
    for r in 0..40 {
        let rec = simulate_observations(&model, 1.0, grid, replicate_seed(6, r)).unwrap();
        let fine = estimate(&model, &rec).unwrap().theta_hat;
        let coarse = estimate(&model, &rec.coarsen(2).unwrap()).unwrap().theta_hat;
        diffs.push((fine - coarse).abs());
        errs.push((fine - 1.0).powi(2));
    }
    let mean_diff = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let rmse = (errs.iter().sum::<f64>() / errs.len() as f64).sqrt();
    assert!(mean_diff < 0.25 * rmse, "coarsening moved estimates by {mean_diff}, rmse {rmse}");
}

#[test]
fn ou_estimates_land_in_range() {
    let model = ou(0.1, 200.0);
    let grid = TimeGrid::new(200.0, 4000).unwrap();
    let inside = (0..100)
        .filter(|&r| {
            let rec = simulate_observations(&model, 1.0, grid, replicate_seed(2024, r)).unwrap();
            (0.5..=1.5).contains(&estimate(&model, &rec).unwrap().theta_hat)
        })
        .count();
    assert!(inside >= 95, "{inside} of 100 in range");
}

fn literal_ou_is_biased_but_exponential_is_not() -> (f64, f64) {
    let model = ou(0.0, 200.0);
    let grid = TimeGrid::new(200.0, 2000).unwrap();
    let mut lit = 0.0;
    let mut exp = 0.0;
    for r in 0..40 {
        let rec = simulate_observations(&model, 1.0, grid, replicate_seed(12, r)).unwrap();
        let literal = EstimatorOptions { scheme: Scheme::Literal, ..Default::default() };
        lit += estimate_with(&model, &rec, &literal).unwrap().theta_hat / 40.0;
        exp += estimate(&model, &rec).unwrap().theta_hat / 40.0;
    }
    (lit, exp)
}

#[test]
fn exponential_scheme_removes_step_bias() {
    let (lit, exp) = literal_ou_is_biased_but_exponential_is_not();
    assert!((exp - 1.0).abs() < 0.1, "exponential mean {exp}");
    assert!((lit - 1.0).abs() > (exp - 1.0).abs(), "literal {lit}, exponential {exp}");
}

/// Cell integral of `(e^{-|t-s|} - e^{-(t+s)}) / 2` over `[a, a+h] x [c, c+h]`.
fn increment_covariance(a: f64, c: f64, h: f64) -> f64 {
    let k = |t: f64, s: f64| 0.5 * ((-(t - s).abs()).exp() - (-(t + s)).exp());
    let inner = |t: f64| {
        let (lo, hi) = (c, c + h);
        if t > lo && t < hi {
            quadrature::integrate(|s| k(t, s), lo, t, 1e-14).integral + quadrature::integrate(|s| k(t, s), t, hi, 1e-14).integral
        } else {
            quadrature::integrate(|s| k(t, s), lo, hi, 1e-14).integral
        }
    };
    quadrature::integrate(inner, a, a + h, 1e-13).integral
}

/// Matrix of the quadratic form `f(dy)` over one real mode, by polarization.
fn polarize(rec: &ObservationRecord, f: &dyn Fn(&ObservationRecord) -> f64) -> DMatrix<f64> {
    let n = rec.grid.n_steps;
    let with = |i: usize, j: usize| {
        let mut r = rec.clone();
        r.dy = vec![vec![Complex64::new(0.0, 0.0); n]];
        r.dy[0][i] += 1.0;
        r.dy[0][j] += 1.0;
        f(&r)
    };
    let diag: Vec<f64> = (0..n).map(|i| with(i, i) / 4.0).collect();
    DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.5 * (with(i, j) - diag[i] - diag[j]) })
}

#[test]
fn statistics_match_quadratic_form_moments() {
    const STEPS: usize = 8;
    const DRAWS: u64 = 40_000;
    let (eps, horizon) = (0.3, 2.0);
    let model = Arc::new(model_ou(1.0, Design::new(eps, horizon, 0.5, 1.0)).unwrap());
    let grid = TimeGrid::new(horizon, STEPS).unwrap();
    let h = grid.dt();
    let cov = DMatrix::from_fn(STEPS, STEPS, |i, j| {
        increment_covariance(i as f64 * h, j as f64 * h, h) + if i == j { eps * eps * h } else { 0.0 }
    });
    let options = EstimatorOptions { scheme: Scheme::Exponential { centering_steps: 1 }, ..Default::default() };
    let template = simulate_observations(&model, 1.0, grid, 0).unwrap();
    let q_n = polarize(&template, &|r| estimate_with(&model, r, &options).unwrap().n);
    let q_z = polarize(&template, &|r| estimate_with(&model, r, &options).unwrap().z);

    let to_c = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
    let (mean_n, var_n) = quadratic_form_moments(&to_c(&cov), &to_c(&q_n), true);
    let (mean_z, var_z) = quadratic_form_moments(&to_c(&cov), &to_c(&q_z), true);

    let draws: Vec<(f64, f64)> = (0..DRAWS)
        .map(|r| {
            let rec = simulate_observations(&model, 1.0, grid, replicate_seed(77, r)).unwrap();
            let est = estimate_with(&model, &rec, &options).unwrap();
            (est.n, est.z)
        })
        .collect();
    let stats = |xs: Vec<f64>| {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    };
    let (sm_n, sv_n) = stats(draws.iter().map(|d| d.0).collect());
    let (sm_z, sv_z) = stats(draws.iter().map(|d| d.1).collect());
    let se = |v: f64| (v / DRAWS as f64).sqrt();
    assert!((sm_n - mean_n).abs() < 4.0 * se(var_n), "E N {sm_n} vs {mean_n}");
    assert!((sm_z - mean_z).abs() < 4.0 * se(var_z), "E Z {sm_z} vs {mean_z}");
    assert!((sv_n / var_n - 1.0).abs() < 0.05, "Var N {sv_n} vs {var_n}");
    assert!((sv_z / var_z - 1.0).abs() < 0.05, "Var Z {sv_z} vs {var_z}");
}

#[test]
fn rejects_malformed_records() {
    let model = ou(0.1, 10.0);
    let grid = TimeGrid::new(10.0, 100).unwrap();
    let rec = simulate_observations(&model, 1.0, grid, 1).unwrap();

    let other = heat(0.1, 10.0, 3);
    assert!(matches!(estimate(&other, &rec), Err(Error::ShapeMismatch(_))));

    let longer = ou(0.1, 20.0);
    assert!(matches!(estimate(&longer, &rec), Err(Error::ShapeMismatch(_))));

    let mut bad = rec.clone();
    bad.dy[0][17] = Complex64::new(f64::NAN, 0.0);
    assert!(matches!(estimate(&model, &bad), Err(Error::NonFinite(_))));

    let mut short = rec.clone();
    short.dy[0].pop();
    assert!(estimate(&model, &short).is_err());

    let negative = EstimatorOptions { tolerance: -1.0, ..Default::default() };
    assert!(estimate_with(&model, &rec, &negative).is_err());
}

#[test]
fn options_round_trip() {
    let opts = EstimatorOptions {
        summation: Summation::Running,
        scheme: Scheme::Exponential { centering_steps: 3 },
        tolerance: 1e-10,
    };
    let text = toml::to_string(&opts).unwrap();
    assert_eq!(toml::from_str::<EstimatorOptions>(&text).unwrap(), opts);
    assert_eq!(toml::from_str::<EstimatorOptions>("").unwrap(), EstimatorOptions::default());
}
