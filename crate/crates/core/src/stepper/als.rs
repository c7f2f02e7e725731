use nalgebra::DMatrix;

use super::{galerkin_residual, StepDiagnostics, StepOptions, TimeStep};
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::LowRankState;

/// Which factor an ALS half-sweep solves for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorSide {
    /// `K = U S` with `V` frozen; `Y = K V^T`.
    Left,
    /// `L = V S^T` with `U` frozen; `Y = U L^T`.
    Right,
}

/// Coefficients of the reduced operator
/// `X -> X + h (own K X + other X (F^T K F) + c G X (F^T G F))`
/// acting on `N x r` factors, where `F` is the frozen orthonormal factor.
struct Reduced {
    own: f64,
    other: DMatrix<f64>,
    mixed: f64,
    mixed_small: DMatrix<f64>,
}

impl Reduced {
    fn new(ts: &TimeStep<'_>, side: FactorSide, frozen: &DMatrix<f64>) -> Self {
        let a = ts.model.alpha(ts.t_next);
        let (own, other_coef) = match side {
            FactorSide::Left => (a.a11, a.a22),
            FactorSide::Right => (a.a22, a.a11),
        };
        let k = ts.op.stiffness_diag();
        let mut kf = frozen.clone();
        for (i, mut row) in kf.row_iter_mut().enumerate() {
            row *= k[i];
        }
        let other = (frozen.transpose() * kf) * other_coef;
        let g = ts.op.grad_coupling_1d();
        let mixed_small = frozen.transpose() * g * frozen;
        Self {
            own,
            other,
            mixed: a.mixed_sum(),
            mixed_small,
        }
    }

    fn apply(&self, ts: &TimeStep<'_>, x: &DMatrix<f64>) -> DMatrix<f64> {
        let k = ts.op.stiffness_diag();
        let mut kx = x.clone();
        for (i, mut row) in kx.row_iter_mut().enumerate() {
            row *= k[i] * self.own;
        }
        let mut out = kx + x * &self.other;
        if self.mixed != 0.0 {
            out += (ts.op.grad_coupling_1d() * x * &self.mixed_small) * self.mixed;
        }
        x + out * ts.h
    }

    fn matrix(&self, ts: &TimeStep<'_>) -> DMatrix<f64> {
        let n = ts.op.basis_dim();
        let r = self.other.nrows();
        let id_r = DMatrix::<f64>::identity(r, r);
        let id_n = DMatrix::<f64>::identity(n, n);
        let k = ts.op.stiffness_1d() * self.own;
        let mut m = linalg::kron(&id_r, &k) + linalg::kron(&self.other.transpose(), &id_n);
        if self.mixed != 0.0 {
            m += linalg::kron(&self.mixed_small.transpose(), ts.op.grad_coupling_1d()) * self.mixed;
        }
        m *= ts.h;
        for i in 0..n * r {
            m[(i, i)] += 1.0;
        }
        m
    }

    fn preconditioner(&self, ts: &TimeStep<'_>) -> DMatrix<f64> {
        let k = ts.op.stiffness_diag();
        DMatrix::from_fn(k.len(), self.other.nrows(), |i, j| {
            1.0 + ts.h * (self.own * k[i] + self.other[(j, j)])
        })
    }
}

/// Assembled `Nr x Nr` matrix of the reduced half-sweep operator on `vec(X)`.
pub fn reduced_operator_matrix(ts: &TimeStep<'_>, side: FactorSide, frozen: &DMatrix<f64>) -> DMatrix<f64> {
    Reduced::new(ts, side, frozen).matrix(ts)
}

/// Minimizes the step objective over one factor with the other frozen.
fn solve_factor(
    ts: &TimeStep<'_>,
    side: FactorSide,
    frozen: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    start: &DMatrix<f64>,
    opts: &StepOptions,
) -> Result<DMatrix<f64>> {
    let reduced = Reduced::new(ts, side, frozen);
    let (n, r) = rhs.shape();
    if opts.use_direct(n * r) {
        let x = linalg::spd_solve(&reduced.matrix(ts), &linalg::vec(rhs), "ALS half-sweep")?;
        Ok(linalg::unvec(&x, n, r))
    } else {
        let out = linalg::pcg(
            |x| reduced.apply(ts, x),
            &reduced.preconditioner(ts),
            rhs,
            Some(start),
            opts.cg_tol,
            opts.cg_max_iter,
        )?;
        Ok(out.solution)
    }
}

/// One backward-Euler step on the rank-`r` manifold: minimizes the step
/// objective over `M_r` by alternating least squares started at `u_prev`.
///
/// A sweep solves for `K = U S` with `V` frozen, orthonormalizes
/// `K = U R`, then solves for `L = V S^T` with the new `U` frozen and sets
/// `L = V R'`, `S = R'^T`. Both half-sweeps minimize the same objective, so
/// it never increases. Sweeps stop once the relative change of the iterate
/// drops below `als_tol`, after `als_max_sweeps`, or after one sweep in
/// single-sweep mode.
pub fn als_variational_step(
    ts: &TimeStep<'_>,
    u_prev: &LowRankState,
    opts: &StepOptions,
) -> Result<(LowRankState, StepDiagnostics)> {
    ts.check()?;
    if u_prev.basis_dim() != ts.op.basis_dim() {
        return Err(Error::Shape("state does not match the basis".into()));
    }
    let anchor = u_prev.to_dense();
    let target = &anchor + ts.f_mean * ts.h;
    let f_start = ts.objective(&anchor, &anchor);
    let mut history = vec![f_start];

    let mut v = u_prev.u2_factors().clone();
    let mut k_guess = u_prev.u1_factors() * u_prev.core();
    let mut l_guess = u_prev.u2_factors() * u_prev.core().transpose();
    let mut y = anchor.clone();
    let mut state = u_prev.clone();
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < opts.als_max_sweeps {
        sweeps += 1;
        let k = solve_factor(ts, FactorSide::Left, &v, &(&target * &v), &k_guess, opts)?;
        let (u, _) = linalg::qr_full_rank(&k, opts.qr_floor(), "ALS left factor")?;
        history.push(ts.objective(&anchor, &(&k * v.transpose())));
        k_guess = k;

        let l = solve_factor(ts, FactorSide::Right, &u, &(target.transpose() * &u), &l_guess, opts)?;
        let (v_new, r2) = linalg::qr_full_rank(&l, opts.qr_floor(), "ALS right factor")?;
        let y_new = &u * l.transpose();
        history.push(ts.objective(&anchor, &y_new));
        v = v_new;
        l_guess = l;
        state = LowRankState::from_parts(u, r2.transpose(), v.clone())?;

        let change = (&y_new - &y).norm() / y_new.norm().max(f64::MIN_POSITIVE);
        y = y_new;
        if change < opts.als_tol {
            converged = true;
            break;
        }
        if opts.single_sweep_mode {
            break;
        }
    }
    if opts.single_sweep_mode {
        converged = true;
    }

    let objective_value = *history.last().expect("history is never empty");
    let residual = galerkin_residual(ts, &state, &anchor);
    let scale = (y.norm() + anchor.norm()) / ts.h + ts.f_mean.norm();
    let diag = StepDiagnostics {
        sweeps_used: sweeps,
        galerkin_residual: residual,
        objective_value,
        objective_start: f_start,
        sigma_r: state.smallest_singular(),
        objective_decreased: super::not_increased(objective_value, f_start),
        converged,
        flagged: !converged && residual > 1e3 * opts.als_tol * scale,
        half_sweep_objectives: history,
    };
    Ok((state, diag))
}
