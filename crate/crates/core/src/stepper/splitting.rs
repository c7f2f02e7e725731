use nalgebra::DMatrix;

use super::{galerkin_residual, InnerSolver, StepDiagnostics, StepOptions, TimeStep};
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::LowRankState;

/// Largest factor size `N r` for which the K and L substeps are solved as
/// assembled least-squares systems under [`InnerSolver::Auto`].
const ASSEMBLED_MAX_UNKNOWNS: usize = 256;

/// How the splitting step updates the core between the K and L substeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoreUpdate {
    /// `S0+ = U1^T U0 S0`: the backward S-substep projected onto the new basis.
    Projection,
    /// Explicit forward-Euler S-substep
    /// `S0+ = S1+ + h U1^T A(U1 S1+ V0^T) V0 - h U1^T f V0`.
    ForwardEuler,
}

/// Projector-splitting Euler step with the projected core update.
pub fn splitting_euler_step(
    ts: &TimeStep<'_>,
    u0: &LowRankState,
    opts: &StepOptions,
) -> Result<(LowRankState, StepDiagnostics)> {
    splitting_euler_step_with(ts, u0, opts, CoreUpdate::Projection)
}

/// Projector-splitting Euler step: K substep, core update, L substep.
///
/// The K and L substeps are the backward-Euler discretizations
///
/// ```text
/// (V0 (x) I) k + h (V0 V0^T (x) I) A (V0 (x) I) k = vec(U0 S0 V0^T) + h (V0 V0^T (x) I) f
/// (I (x) U1) l + h (I (x) U1 U1^T) A (I (x) U1) l = vec(U1 S0+ V0^T) + h (I (x) U1 U1^T) f
/// ```
///
/// which are overdetermined but consistent. Small systems are assembled
/// column by column from operator applications and solved by least squares;
/// larger ones are reduced by the orthonormality of `V0` and `U1` and solved
/// with CG.
pub fn splitting_euler_step_with(
    ts: &TimeStep<'_>,
    u0: &LowRankState,
    opts: &StepOptions,
    update: CoreUpdate,
) -> Result<(LowRankState, StepDiagnostics)> {
    ts.check()?;
    let n = ts.op.basis_dim();
    if u0.basis_dim() != n {
        return Err(Error::Shape("state does not match the basis".into()));
    }
    let r = u0.rank();
    let assembled = match opts.inner_solver {
        InnerSolver::Direct => true,
        InnerSolver::ConjugateGradient => false,
        InnerSolver::Auto => n * r <= ASSEMBLED_MAX_UNKNOWNS,
    };
    let anchor = u0.to_dense();
    let f_start = ts.objective(&anchor, &anchor);
    let v0 = u0.u2_factors();
    let a = ts.model.alpha(ts.t_next);

    // K substep
    let k = if assembled {
        let proj_v = v0 * v0.transpose();
        let b = assemble_columns(
            n,
            n,
            r,
            |z| z.clone() * v0.transpose(),
            |z| z + ts.op.apply_operator(ts.model, ts.t_next, z) * &proj_v * ts.h,
        );
        let rhs = &anchor + ts.f_mean * &proj_v * ts.h;
        let sol = linalg::lstsq(&b, &linalg::vec(&rhs), "splitting K substep")?;
        linalg::unvec(&sol, n, r)
    } else {
        let rhs = (&anchor + ts.f_mean * ts.h) * v0;
        let diag = weighted_diag(ts, a.a11, a.a22, v0);
        linalg::pcg(
            |x| x + ts.op.apply_operator(ts.model, ts.t_next, &(x * v0.transpose())) * v0 * ts.h,
            &diag,
            &rhs,
            Some(&(u0.u1_factors() * u0.core())),
            opts.cg_tol,
            opts.cg_max_iter,
        )?
        .solution
    };
    let (u1, s1) = linalg::qr_full_rank(&k, opts.qr_floor(), "splitting K substep")?;
    let mid = &k * v0.transpose();
    let f_mid = ts.objective(&anchor, &mid);

    // core update
    let s0_plus = match update {
        CoreUpdate::Projection => u1.transpose() * u0.u1_factors() * u0.core(),
        CoreUpdate::ForwardEuler => {
            let au = ts.op.apply_operator(ts.model, ts.t_next, &mid);
            &s1 + (u1.transpose() * (au - ts.f_mean) * v0) * ts.h
        }
    };

    // L substep, unknown L^T (r x N)
    let lt = if assembled {
        let proj_u = &u1 * u1.transpose();
        let b = assemble_columns(
            n,
            r,
            n,
            |z| &u1 * z,
            |z| z + &proj_u * ts.op.apply_operator(ts.model, ts.t_next, z) * ts.h,
        );
        let rhs = &u1 * &s0_plus * v0.transpose() + &proj_u * ts.f_mean * ts.h;
        let sol = linalg::lstsq(&b, &linalg::vec(&rhs), "splitting L substep")?;
        linalg::unvec(&sol, r, n)
    } else {
        let rhs = v0 * s0_plus.transpose() + ts.f_mean.transpose() * &u1 * ts.h;
        let diag = weighted_diag(ts, a.a22, a.a11, &u1);
        let x = linalg::pcg(
            |x| {
                x + ts
                    .op
                    .apply_operator(ts.model, ts.t_next, &(&u1 * x.transpose()))
                    .transpose()
                    * &u1
                    * ts.h
            },
            &diag,
            &rhs,
            Some(&(v0 * s0_plus.transpose())),
            opts.cg_tol,
            opts.cg_max_iter,
        )?
        .solution;
        x.transpose()
    };
    let (v1, r2) = linalg::qr_full_rank(&lt.transpose(), opts.qr_floor(), "splitting L substep")?;
    let state = LowRankState::from_parts(u1, r2.transpose(), v1)?;
    let f_end = ts.objective(&anchor, &state.to_dense());

    let diag = StepDiagnostics {
        sweeps_used: 1,
        galerkin_residual: galerkin_residual(ts, &state, &anchor),
        objective_value: f_end,
        objective_start: f_start,
        sigma_r: state.smallest_singular(),
        objective_decreased: super::not_increased(f_end, f_start),
        converged: true,
        flagged: false,
        half_sweep_objectives: vec![f_start, f_mid, f_end],
    };
    Ok((state, diag))
}

/// Assembles the `N^2 x (rows * cols)` matrix whose column `(a, b)` is
/// `vec(apply(embed(E_ab)))` for the unit matrix `E_ab` of size `rows x cols`.
fn assemble_columns(
    n: usize,
    rows: usize,
    cols: usize,
    embed: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
    apply: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n * n, rows * cols);
    let mut e = DMatrix::zeros(rows, cols);
    for col in 0..cols {
        for row in 0..rows {
            e[(row, col)] = 1.0;
            let z = apply(&embed(&e));
            b.column_mut(row + rows * col).copy_from_slice(z.as_slice());
            e[(row, col)] = 0.0;
        }
    }
    b
}

/// Preconditioner `1 + h (own k_i + other (F^T K F)_jj)` for reduced factor
/// equations with frozen orthonormal factor `F`.
fn weighted_diag(ts: &TimeStep<'_>, own: f64, other: f64, frozen: &DMatrix<f64>) -> DMatrix<f64> {
    let k = ts.op.stiffness_diag();
    let r = frozen.ncols();
    let fkf: Vec<f64> = (0..r)
        .map(|j| frozen.column(j).iter().zip(k.iter()).map(|(x, kk)| kk * x * x).sum())
        .collect();
    DMatrix::from_fn(k.len(), r, |i, j| 1.0 + ts.h * (own * k[i] + other * fkf[j]))
}
