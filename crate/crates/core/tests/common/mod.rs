//! Independent oracles shared by the integration tests. Nothing here calls the
//! crate's Galerkin assembly: matrices come from quadrature of the basis
//! functions themselves.

#![allow(dead_code)]

use std::f64::consts::PI;

use lowrank_parabolic::galerkin::{Alpha, SourceSpec};
use lowrank_parabolic::manifold::LowRankState;
use nalgebra::{DMatrix, DVector};

/// Gauss-Legendre nodes and weights on `[0, 1]` by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

pub fn phi(n: usize, x: f64) -> f64 {
    2f64.sqrt() * (n as f64 * PI * x).sin()
}

pub fn dphi(n: usize, x: f64) -> f64 {
    2f64.sqrt() * n as f64 * PI * (n as f64 * PI * x).cos()
}

/// One-dimensional Gram matrices by quadrature, 1-based modes `1..=n`:
/// mass `int phi_i phi_j`, stiffness `int phi_i' phi_j'` and coupling
/// `int phi_i' phi_j`.
pub struct Gram1d {
    pub mass: DMatrix<f64>,
    pub stiff: DMatrix<f64>,
    pub coupling: DMatrix<f64>,
}

pub fn gram_1d(n: usize) -> Gram1d {
    let (x, w) = gauss_legendre(4 * n + 8);
    let quad = |f: &dyn Fn(f64) -> f64| x.iter().zip(&w).map(|(&x, &w)| w * f(x)).sum::<f64>();
    Gram1d {
        mass: DMatrix::from_fn(n, n, |i, j| quad(&|t| phi(i + 1, t) * phi(j + 1, t))),
        stiff: DMatrix::from_fn(n, n, |i, j| quad(&|t| dphi(i + 1, t) * dphi(j + 1, t))),
        coupling: DMatrix::from_fn(n, n, |i, j| quad(&|t| dphi(i + 1, t) * phi(j + 1, t))),
    }
}

/// Index of the coefficient `Y[i, j]` in `vec(Y)`.
pub fn idx(n: usize, i: usize, j: usize) -> usize {
    i + n * j
}

/// Dense `N^2 x N^2` stiffness matrix of `a(u, v) = int grad v . alpha grad u`
/// in the product basis, entry `(test, trial)`.
pub fn dense_stiffness(n: usize, a: &Alpha) -> DMatrix<f64> {
    let g = gram_1d(n);
    let mut out = DMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    // trial phi_i(x) phi_j(y), test phi_k(x) phi_l(y)
                    let v = a.a11 * g.stiff[(i, k)] * g.mass[(j, l)]
                        + a.a22 * g.mass[(i, k)] * g.stiff[(j, l)]
                        + a.a12 * (g.coupling[(i, k)] * g.coupling[(l, j)] + g.coupling[(k, i)] * g.coupling[(j, l)]);
                    out[(idx(n, k, l), idx(n, i, j))] = v;
                }
            }
        }
    }
    out
}

/// `a(u, v)` by tensor Gauss quadrature of the represented functions.
pub fn bilinear_by_quadrature(a: &Alpha, y: &DMatrix<f64>, z: &DMatrix<f64>) -> f64 {
    let n = y.nrows();
    let (x, w) = gauss_legendre(4 * n + 16);
    let grad = |c: &DMatrix<f64>, s: f64, t: f64| {
        let (mut gx, mut gy) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                gx += c[(i, j)] * dphi(i + 1, s) * phi(j + 1, t);
                gy += c[(i, j)] * phi(i + 1, s) * dphi(j + 1, t);
            }
        }
        (gx, gy)
    };
    let mut total = 0.0;
    for (p, &s) in x.iter().enumerate() {
        for (q, &t) in x.iter().enumerate() {
            let (ux, uy) = grad(y, s, t);
            let (vx, vy) = grad(z, s, t);
            total += w[p] * w[q] * (a.a11 * ux * vx + a.a12 * (ux * vy + uy * vx) + a.a22 * uy * vy);
        }
    }
    total
}

/// `|d1 d2 u|_{L2}` by tensor Gauss quadrature.
pub fn mixed_seminorm_by_quadrature(y: &DMatrix<f64>) -> f64 {
    let n = y.nrows();
    let (x, w) = gauss_legendre(4 * n + 16);
    let mut total = 0.0;
    for (p, &s) in x.iter().enumerate() {
        for (q, &t) in x.iter().enumerate() {
            let mut v = 0.0;
            for i in 0..n {
                for j in 0..n {
                    v += y[(i, j)] * dphi(i + 1, s) * dphi(j + 1, t);
                }
            }
            total += w[p] * w[q] * v * v;
        }
    }
    total.sqrt()
}

pub fn vec(y: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(y.as_slice())
}

pub fn unvec(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, v.as_slice())
}

/// Interval mean of a source by Gauss quadrature in time.
pub fn source_mean_by_quadrature(source: &SourceSpec, a: f64, b: f64) -> DMatrix<f64> {
    let (x, w) = gauss_legendre(12);
    let n = source.basis_dim();
    let mut out = DMatrix::zeros(n, n);
    for (&x, &w) in x.iter().zip(&w) {
        out += source.evaluate(a + x * (b - a)) * w;
    }
    out
}

/// Backward-Euler step by a dense LU solve of `(I + h A) y = u + h f`.
pub fn dense_backward_euler(stiff: &DMatrix<f64>, h: f64, u: &DMatrix<f64>, f: &DMatrix<f64>) -> DMatrix<f64> {
    let n = u.nrows();
    let m = DMatrix::identity(n * n, n * n) + stiff * h;
    let rhs = vec(u) + vec(f) * h;
    let y = m.lu().solve(&rhs).expect("backward Euler matrix is regular");
    unvec(&y, n)
}

/// Dense tangent projector `P1 (x) I + I (x) P2 - P1 (x) P2` acting on
/// `vec(Y)`, with `P1 = U U^T` on the first index and `P2 = V V^T` on the
/// second.
pub fn dense_projector(state: &LowRankState) -> DMatrix<f64> {
    let u = state.u1_factors();
    let v = state.u2_factors();
    let p1 = u * u.transpose();
    let p2 = v * v.transpose();
    let n = p1.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    // vec(P1 Y) = (I (x) P1) vec Y, vec(Y P2) = (P2 (x) I) vec Y
    id.kronecker(&p1) + p2.kronecker(&id) - p2.kronecker(&p1)
}

/// `int |u_hat - v_hat|^2 dt` by composite Simpson on each step, exact for the
/// quadratic integrand.
pub fn simpson_gap(times: &[f64], states: &[DMatrix<f64>]) -> f64 {
    let mut total = 0.0;
    for i in 1..states.len() {
        let (a, b) = (times[i - 1], times[i]);
        let f = |t: f64| {
            let lin = &states[i - 1] + (&states[i] - &states[i - 1]) * ((t - a) / (b - a));
            (lin - &states[i]).norm_squared()
        };
        total += (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
    }
    total
}

/// Diagonal rank-`r` state with entries on the given 0-based modes.
pub fn mode_state(n: usize, modes: &[usize], weights: &[f64]) -> LowRankState {
    let r = modes.len();
    let u = DMatrix::from_fn(n, r, |i, k| if i == modes[k] { 1.0 } else { 0.0 });
    let s = DMatrix::from_diagonal(&DVector::from_column_slice(weights));
    LowRankState::new(u.clone(), s, u).expect("orthonormal modes")
}
