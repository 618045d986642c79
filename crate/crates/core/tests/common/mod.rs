//! Shared oracle machinery for the integration tests: fixed-step RK4
//! propagation of matrix/vector ODEs, composite Simpson quadrature, and
//! randomized stable test systems. Everything here is independent of the
//! series evaluations under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Fixed-step RK4 integration of the matrix ODE `Ẋ = f(t, X)` from `t0` to
/// `t1`.
pub fn rk4_matrix<F>(f: F, x0: DMatrix<f64>, t0: f64, t1: f64, steps: usize) -> DMatrix<f64>
where
    F: Fn(f64, &DMatrix<f64>) -> DMatrix<f64>,
{
    let h = (t1 - t0) / steps as f64;
    let mut x = x0;
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t, &x);
        let k2 = f(t + h / 2.0, &(&x + (h / 2.0) * &k1));
        let k3 = f(t + h / 2.0, &(&x + (h / 2.0) * &k2));
        let k4 = f(t + h, &(&x + h * &k3));
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    x
}

/// Fixed-step RK4 integration of the vector ODE `ẋ = f(t, x)`.
pub fn rk4_vector<F>(f: F, x0: DVector<f64>, t0: f64, t1: f64, steps: usize) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let h = (t1 - t0) / steps as f64;
    let mut x = x0;
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t, &x);
        let k2 = f(t + h / 2.0, &(&x + (h / 2.0) * &k1));
        let k3 = f(t + h / 2.0, &(&x + (h / 2.0) * &k2));
        let k4 = f(t + h, &(&x + h * &k3));
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    x
}

/// `e^{At}` by RK4 propagation of `Ẋ = AX`, `X(0) = I` — the ODE oracle for
/// the series-based state-transition matrix.
pub fn expm_ode(a: &DMatrix<f64>, t: f64, steps: usize) -> DMatrix<f64> {
    let n = a.nrows();
    rk4_matrix(|_, x| a * x, DMatrix::identity(n, n), 0.0, t, steps)
}

/// Composite Simpson quadrature of a matrix-valued integrand over `[a, b]`
/// with `panels` panels (each panel samples both endpoints and the midpoint).
pub fn simpson_matrix<F>(f: F, a: f64, b: f64, panels: usize) -> DMatrix<f64>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for k in 1..panels {
        acc += 2.0 * f(a + k as f64 * h);
    }
    for k in 0..panels {
        acc += 4.0 * f(a + (k as f64 + 0.5) * h);
    }
    acc * (h / 6.0)
}

/// Matrix exponential sampled on the uniform Simpson grid over `[0, t_max]`
/// by RK4 propagation between consecutive nodes.
///
/// Returns `2·panels + 1` samples at `t_max·k/(2·panels)` for `k = 0..`,
/// i.e. every panel endpoint and midpoint. Propagating step by step keeps
/// the per-node cost constant while each node inherits only the accumulated
/// RK4 error, which at these step counts sits far below the tolerances the
/// oracles assert.
pub fn expm_grid(a: &DMatrix<f64>, t_max: f64, panels: usize, substeps: usize) -> Vec<DMatrix<f64>> {
    let n = a.nrows();
    let nodes = 2 * panels + 1;
    let dt = t_max / (nodes - 1) as f64;
    let mut out = Vec::with_capacity(nodes);
    let mut x = DMatrix::identity(n, n);
    out.push(x.clone());
    for _ in 1..nodes {
        x = rk4_matrix(|_, y| a * y, x, 0.0, dt, substeps);
        out.push(x.clone());
    }
    out
}

/// Composite Simpson over precomputed node samples (`2·panels + 1` of them,
/// uniformly spaced on `[0, t_max]`), with an arbitrary scalar weight per
/// node time.
pub fn simpson_from_grid<W>(grid: &[DMatrix<f64>], t_max: f64, weight: W) -> DMatrix<f64>
where
    W: Fn(f64) -> f64,
{
    let nodes = grid.len();
    assert!(nodes >= 3 && nodes % 2 == 1);
    let panels = (nodes - 1) / 2;
    let h = t_max / panels as f64;
    let dt = t_max / (nodes - 1) as f64;
    let mut acc = DMatrix::zeros(grid[0].nrows(), grid[0].ncols());
    for (k, g) in grid.iter().enumerate() {
        let coeff = if k == 0 || k == nodes - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += coeff * weight(k as f64 * dt) * g;
    }
    acc * (h / 6.0)
}

/// Random matrix with i.i.d. uniform entries in `[-1, 1]`.
pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Random Hurwitz-stable matrix with spectral radius at most `rho_max`.
pub fn random_stable_matrix<R: Rng>(rng: &mut R, n: usize, rho_max: f64) -> DMatrix<f64> {
    loop {
        let mut a = random_matrix(rng, n, n) * rng.random_range(0.2..rho_max);
        let eigs = a.complex_eigenvalues();
        let max_re = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        if max_re > -0.05 {
            // shift into the open left half plane
            a -= (max_re + rng.random_range(0.1..1.0)) * DMatrix::<f64>::identity(n, n);
        }
        let rho = a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if rho <= rho_max {
            return a;
        }
    }
}

/// Relative difference `‖x − y‖ / max(‖y‖, 1)`.
pub fn rel_err(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (x - y).norm() / y.norm().max(1.0)
}
