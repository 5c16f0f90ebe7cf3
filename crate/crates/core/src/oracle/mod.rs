//! Matrix discretizations of the per-mode solution operator, used to check
//! operator identities and Hellinger bounds numerically.
//!
//! The solution operator of one mode on the grid `t_i = i dt`, `i < n`, is the
//! strictly lower triangular Toeplitz matrix `S[i, j] = dt exp(lambda (t_i - t_j))`.
//! Residuals of kernel identities are reported on the kernel scale, that is
//! matrix entries divided by `dt`, where left-rectangle quadrature is first order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::simulator::{cov_kernel, step_moments, TimeGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest grid on which dense matrices are formed.
pub const DENSE_LIMIT: usize = 2048;

fn check_dense(grid: TimeGrid) -> Result<()> {
    if grid.n_steps > DENSE_LIMIT {
        return Err(invalid(format!("{} steps exceed the dense limit of {DENSE_LIMIT}", grid.n_steps)));
    }
    Ok(())
}

/// Strictly lower triangular Toeplitz solution operator of one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSolutionOperator {
    pub lambda: Complex64,
    pub grid: TimeGrid,
    /// `column[l] = dt exp(lambda l dt)` for `l >= 1`, `column[0] = 0`.
    pub column: Vec<Complex64>,
}

impl DiscreteSolutionOperator {
    pub fn new(lambda: Complex64, grid: TimeGrid) -> Result<Self> {
        if lambda.re > 0.0 || !lambda.re.is_finite() || !lambda.im.is_finite() {
            return Err(invalid(format!("lambda = {lambda} must be finite with Re <= 0")));
        }
        let h = grid.dt();
        let column = (0..grid.n_steps)
            .map(|l| if l == 0 { ZERO } else { (lambda * (l as f64 * h)).exp() * h })
            .collect();
        Ok(Self { lambda, grid, column })
    }

    pub fn dim(&self) -> usize {
        self.column.len()
    }

    /// Dense matrix; callers keep `n` at most [`DENSE_LIMIT`].
    pub fn dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| if i > j { self.column[i - j] } else { ZERO })
    }

    /// `S x` by the recursion `y_i = e^(lambda dt) (y_{i-1} + dt x_{i-1})`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let h = self.grid.dt();
        let step = (self.lambda * h).exp();
        let mut y = vec![ZERO; x.len()];
        for i in 1..x.len() {
            y[i] = step * (y[i - 1] + x[i - 1] * h);
        }
        y
    }

    /// `S* x`.
    pub fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        let h = self.grid.dt();
        let step = (self.lambda * h).exp().conj();
        let n = x.len();
        let mut y = vec![ZERO; n];
        for j in (0..n.saturating_sub(1)).rev() {
            y[j] = step * (y[j + 1] + x[j + 1] * h);
        }
        y
    }

    /// First column of the product with another operator on the same grid.
    fn product_column(&self, other: &Self) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|i| (1..i).map(|k| self.column[i - k] * other.column[k]).sum())
            .collect()
    }

    /// Largest singular value by Lanczos on `S* S`.
    pub fn norm(&self) -> f64 {
        largest_eigenvalue(self.dim(), |v| self.apply_adjoint(&self.apply(v))).sqrt()
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator, by Lanczos
/// with full reorthogonalization.
fn largest_eigenvalue(n: usize, op: impl Fn(&[Complex64]) -> Vec<Complex64>) -> f64 {
    const MAX_STEPS: usize = 120;
    const TOL: f64 = 1e-13;
    if n == 0 {
        return 0.0;
    }
    let start: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0 + 0.5 * (i as f64).sin(), 0.0)).collect();
    let s = norm2(&start);
    let mut basis = vec![start.into_iter().map(|z| z / s).collect::<Vec<_>>()];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut previous = f64::NAN;
    for step in 0..MAX_STEPS.min(n) {
        let v = &basis[step];
        let mut w = op(v);
        let a = dot(v, &w).re;
        alpha.push(a);
        for q in &basis {
            let c = dot(q, &w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= qi * c;
            }
        }
        let b = norm2(&w);
        let k = alpha.len();
        let tri = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let top = tri.symmetric_eigenvalues().max();
        if b <= TOL * top.abs().max(f64::MIN_POSITIVE) || (top - previous).abs() <= TOL * top {
            return top;
        }
        previous = top;
        beta.push(b);
        basis.push(w.into_iter().map(|z| z / b).collect());
    }
    previous
}

/// Measured norm of `max(|Re lambda|, 1/T) S` against its bound of one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsNormCheck {
    pub norm: f64,
    pub bound: f64,
    /// First-order quadrature allowance `2 max(|lambda|, 1/T) dt`.
    pub tolerance: f64,
}

impl RsNormCheck {
    pub fn passes(&self) -> bool {
        self.norm <= self.bound + self.tolerance
    }
}

pub fn check_rs_norm(lambda: Complex64, grid: TimeGrid) -> Result<RsNormCheck> {
    let op = DiscreteSolutionOperator::new(lambda, grid)?;
    let scale = lambda.re.abs().max(1.0 / grid.horizon);
    Ok(RsNormCheck {
        norm: scale * op.norm(),
        bound: 1.0,
        tolerance: 2.0 * lambda.norm().max(1.0 / grid.horizon) * grid.dt(),
    })
}

/// Kernel-scale residuals of `S1 - S0 = (lambda1 - lambda0) S0 S1` and of the
/// same identity with the product reversed.
pub fn check_perturbation_identity(lambda0: Complex64, lambda1: Complex64, grid: TimeGrid) -> Result<(f64, f64)> {
    let s0 = DiscreteSolutionOperator::new(lambda0, grid)?;
    let s1 = DiscreteSolutionOperator::new(lambda1, grid)?;
    let h = grid.dt();
    let dl = lambda1 - lambda0;
    let residual = |prod: Vec<Complex64>| -> f64 {
        (0..s0.dim())
            .map(|i| ((s1.column[i] - s0.column[i]) - prod[i] * dl).norm() / h)
            .fold(0.0, f64::max)
    };
    Ok((residual(s0.product_column(&s1)), residual(s1.product_column(&s0))))
}

/// Kernel-scale residual between the closed-form covariance kernel and
/// `S S* / dt` on the grid.
pub fn check_cov_factorization(lambda: Complex64, grid: TimeGrid) -> Result<f64> {
    let op = DiscreteSolutionOperator::new(lambda, grid)?;
    let h = grid.dt();
    let n = op.dim();
    // (S S*)[i, j] = column[i - j] / dt * g_j for i >= j, g_j = sum_{k<j} |column[j - k]|^2.
    let mut g = vec![0.0; n];
    for j in 1..n {
        g[j] = g[j - 1] + op.column[j].norm_sqr();
    }
    let mut worst = 0.0f64;
    for (j, &gj) in g.iter().enumerate() {
        for i in j..n {
            let decay = if i == j { Complex64::new(1.0, 0.0) } else { op.column[i - j] / h };
            let product = decay * gj / h;
            let exact = cov_kernel(lambda, grid.time(i), grid.time(j));
            worst = worst.max((exact - product).norm());
        }
    }
    Ok(worst)
}

/// Discretization of the observation covariance used by [`matrix_hellinger`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovScheme {
    /// `eps^2 dt I + b^2 dt S S*`.
    LeftRectangle,
    /// Exact covariance of the increments over grid cells. The resulting
    /// distance never exceeds the continuous-time one.
    #[default]
    ExactCells,
}

/// `Q[i, j] = E[dY_i conj(dY_j)]` for one mode started at zero.
pub fn observation_covariance(lambda: Complex64, b: f64, eps: f64, grid: TimeGrid, scheme: CovScheme) -> Result<DMatrix<Complex64>> {
    check_dense(grid)?;
    let n = grid.n_steps;
    let h = grid.dt();
    let noise = Complex64::new(eps * eps * h, 0.0);
    let mut q = match scheme {
        CovScheme::LeftRectangle => {
            let s = DiscreteSolutionOperator::new(lambda, grid)?.dense();
            &s * s.adjoint() * Complex64::new(b * b * h, 0.0)
        }
        CovScheme::ExactCells => {
            let mom = step_moments(lambda, h)?;
            // Cross moment of the state at the end of cell j with the integral over cell j.
            let mut cross = vec![ZERO; n];
            let mut diag = vec![0.0; n];
            let mut state_var = 0.0;
            for j in 0..n {
                cross[j] = mom.decay * mom.phi.conj() * state_var + mom.cov_state_integral;
                diag[j] = mom.phi.norm_sqr() * state_var + mom.var_integral;
                state_var = mom.decay.norm_sqr() * state_var + mom.var_state;
            }
            let mut q = DMatrix::from_element(n, n, ZERO);
            for j in 0..n {
                q[(j, j)] = Complex64::new(diag[j], 0.0);
                let mut carry = mom.phi * cross[j];
                for i in j + 1..n {
                    q[(i, j)] = carry;
                    q[(j, i)] = carry.conj();
                    carry *= mom.decay;
                }
            }
            q * Complex64::new(b * b, 0.0)
        }
    };
    for i in 0..n {
        q[(i, i)] += noise;
    }
    Ok(q)
}

fn log_det(q: DMatrix<Complex64>) -> Result<f64> {
    let chol = q.cholesky().ok_or_else(|| Error::Singular("covariance is not positive definite".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|z| z.re.ln()).sum::<f64>())
}

/// Squared Hellinger distance `2 - 2 BC` between the discretized observation
/// laws of one mode at two eigenvalues. A conjugate pair (`mult = 2`)
/// contributes its Bhattacharyya coefficient squared.
pub fn matrix_hellinger(
    lambda0: Complex64,
    lambda1: Complex64,
    b: f64,
    eps: f64,
    mult: u8,
    grid: TimeGrid,
    scheme: CovScheme,
) -> Result<f64> {
    if eps == 0.0 && scheme == CovScheme::LeftRectangle {
        return Err(Error::Singular("left-rectangle covariance is singular without noise".into()));
    }
    let q0 = observation_covariance(lambda0, b, eps, grid, scheme)?;
    let q1 = observation_covariance(lambda1, b, eps, grid, scheme)?;
    let mid = (&q0 + &q1) * Complex64::new(0.5, 0.0);
    let log_bc = 0.25 * log_det(q0)? + 0.25 * log_det(q1)? - 0.5 * log_det(mid)?;
    Ok(-2.0 * (mult as f64 * log_bc).exp_m1())
}

/// Mean and variance of `Re(y* K y)` for a circular complex Gaussian `y` with
/// covariance `Q`, or of `y^T K y` for a real one when `real` is set.
pub fn quadratic_form_moments(q: &DMatrix<Complex64>, k: &DMatrix<Complex64>, real: bool) -> (f64, f64) {
    let herm = (k + k.adjoint()) * Complex64::new(0.5, 0.0);
    let kq = &herm * q;
    let mean = kq.trace().re;
    let var = (&kq * &kq).trace().re;
    (mean, if real { 2.0 * var } else { var })
}

/// `int sqrt(p q)` for centered normals with standard deviations `s0`, `s1`,
/// by double-exponential quadrature.
pub fn bhattacharyya_quadrature(s0: f64, s1: f64) -> f64 {
    let pdf = |x: f64, s: f64| (-0.5 * (x / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    // The integrand is even with width sqrt(2) s0 s1 / sqrt(s0^2 + s1^2); the
    // peak sits at an endpoint where the nodes cluster.
    let width = std::f64::consts::SQRT_2 * s0 * s1 / s0.hypot(s1);
    2.0 * quadrature::integrate(|x| (pdf(x, s0) * pdf(x, s1)).sqrt(), 0.0, 40.0 * width, 1e-14).integral
}

/// `int_0^1 int_0^t exp(x v) dv dt` by nested quadrature.
pub fn f_factor_squared_quadrature(x: f64) -> f64 {
    quadrature::integrate(
        |t| quadrature::integrate(|v| (x * v).exp(), 0.0, t, 1e-14).integral,
        0.0,
        1.0,
        1e-13,
    )
    .integral
}

/// Dense largest singular value, for cross-checking [`DiscreteSolutionOperator::norm`].
pub fn dense_norm(op: &DiscreteSolutionOperator) -> f64 {
    op.dense().singular_values().max()
}

/// `S x` through the dense matrix.
pub fn dense_apply(op: &DiscreteSolutionOperator, x: &[Complex64]) -> Vec<Complex64> {
    (op.dense() * DVector::from_column_slice(x)).iter().copied().collect()
}

/// One line of [`standard_suite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub name: String,
    pub value: f64,
    pub limit: String,
    pub passed: bool,
}

impl OracleOutcome {
    fn below(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit: format!("<= {limit}"), passed: value <= limit }
    }

    fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), value, limit: format!("in [{lo}, {hi}]"), passed: (lo..=hi).contains(&value) }
    }
}

/// Ratio of residuals at `n` and `2n` steps; close to 2 for a first-order scheme.
fn halving_ratio(residual: impl Fn(TimeGrid) -> Result<f64>, horizon: f64, n: usize) -> Result<f64> {
    Ok(residual(TimeGrid::new(horizon, n)?)? / residual(TimeGrid::new(horizon, 2 * n)?)?)
}

/// Single-mode model with eigenvalue `m + theta ell`, `ell = -1`, on `[lo, hi]`.
fn single_mode(eps: f64, horizon: f64, lo: f64, hi: f64) -> Result<crate::spectral::SpectralModel> {
    use crate::spectral::{Design, ModeLabel, ModeSpec, SpectralModel};
    let mode = ModeSpec::new(ZERO, Complex64::new(-1.0, 0.0), 1.0, 1, ModeLabel::Unlabelled);
    let mut model = SpectralModel::new(vec![mode], Design::new(eps, horizon, lo, hi), 1, "single mode")?;
    model.finite_dimensional = true;
    Ok(model)
}

/// Fixed battery of operator and Hellinger checks with their pass limits.
pub fn standard_suite() -> Result<Vec<OracleOutcome>> {
    let c = Complex64::new;
    let mut out = Vec::new();

    for (lambda, horizon, n, limit) in
        [(c(-1.0, 0.0), 10.0, 2000, 1.01), (ZERO, 1.0, 1000, 1.002), (c(-100.0, 0.0), 1.0, 10_000, 1.02)]
    {
        let check = check_rs_norm(lambda, TimeGrid::new(horizon, n)?)?;
        out.push(OracleOutcome::below(&format!("rs_norm lambda={lambda} T={horizon} n={n}"), check.norm, limit));
    }

    for lambda1 in [c(-2.0, 0.0), c(-1.0, 2.0)] {
        let grid = TimeGrid::new(5.0, 4000)?;
        let (fwd, rev) = check_perturbation_identity(c(-1.0, 0.0), lambda1, grid)?;
        out.push(OracleOutcome::below(&format!("perturbation lambda1={lambda1}"), fwd.max(rev), 5e-3));
        let ratio = halving_ratio(
            |g| check_perturbation_identity(c(-1.0, 0.0), lambda1, g).map(|(a, b)| a.max(b)),
            5.0,
            1000,
        )?;
        out.push(OracleOutcome::within(&format!("perturbation order lambda1={lambda1}"), ratio, 1.8, 2.2));
    }

    let grid = TimeGrid::new(2.0, 200)?;
    out.push(OracleOutcome::below("cov factorization lambda=0", check_cov_factorization(ZERO, grid)?, grid.dt()));
    for lambda in [c(-1.0, 0.0), c(-1.0, 1.0)] {
        let ratio = halving_ratio(|g| check_cov_factorization(lambda, g), 2.0, 200)?;
        out.push(OracleOutcome::within(&format!("cov factorization order lambda={lambda}"), ratio, 1.8, 2.2));
    }

    let (l0, l1, eps, horizon) = (c(-1.0, 0.0), c(-1.1, 0.0), 0.1, 4.0);
    let h = |a, b, n| matrix_hellinger(a, b, 1.0, eps, 1, TimeGrid::new(horizon, n)?, CovScheme::ExactCells);
    let coarse = h(l0, l1, 512)?;
    let bound = crate::hellinger::hellinger_bound_commuting(&single_mode(eps, horizon, 1.0, 1.1)?, 1.0, 1.1)?;
    let contractive = bound.contractive.unwrap_or(f64::INFINITY);
    out.push(OracleOutcome::below("matrix hellinger vs contractive bound", coarse, contractive));
    out.push(OracleOutcome::below("matrix hellinger refinement", (coarse - h(l0, l1, 1024)?).abs(), 1e-3));
    out.push(OracleOutcome::below("matrix hellinger symmetry", (coarse - h(l1, l0, 512)?).abs(), 1e-12));
    Ok(out)
}

/// Contractive bound for the single-mode model with eigenvalues `-theta0`, `-theta1`.
pub fn single_mode_contractive_bound(theta0: f64, theta1: f64, eps: f64, horizon: f64) -> Result<f64> {
    let (lo, hi) = (theta0.min(theta1), theta0.max(theta1));
    let model = single_mode(eps, horizon, lo, hi)?;
    let report = crate::hellinger::hellinger_bound_commuting(&model, theta0, theta1)?;
    report.contractive.ok_or(Error::NotContractive { index: 0, theta: hi, re: 0.0 })
}
