use nalgebra::DMatrix;

use super::{StepOptions, TimeStep};
use crate::error::{Error, Result};
use crate::linalg;

/// Largest mode count solved densely by the reference stepper under
/// [`super::InnerSolver::Auto`] (an `N^2 x N^2` Cholesky factorization per step).
const REFERENCE_DIRECT_MAX_MODES: usize = 16;

/// Full-space backward Euler: solves `(I + h A(t_next)) Y = Y_i + h f`.
///
/// Uses a dense Cholesky solve of the assembled Kronecker operator for small
/// bases and diagonally preconditioned CG otherwise. The preconditioner is
/// `1 + h (a11 k_i + a22 k_j)`, i.e. the exact inverse of the divergence part.
pub fn reference_step(ts: &TimeStep<'_>, y_prev: &DMatrix<f64>, opts: &StepOptions) -> Result<DMatrix<f64>> {
    ts.check()?;
    let n = ts.op.basis_dim();
    if y_prev.shape() != (n, n) {
        return Err(Error::Shape("previous state does not match the basis".into()));
    }
    let rhs = y_prev + ts.f_mean * ts.h;
    let direct = match opts.inner_solver {
        super::InnerSolver::Auto => n <= REFERENCE_DIRECT_MAX_MODES,
        _ => opts.use_direct(n * n),
    };
    if direct {
        let mut m = ts.op.assemble_dense(ts.model, ts.t_next) * ts.h;
        for i in 0..n * n {
            m[(i, i)] += 1.0;
        }
        let x = linalg::spd_solve(&m, &linalg::vec(&rhs), "reference step")?;
        Ok(linalg::unvec(&x, n, n))
    } else {
        let a = ts.model.alpha(ts.t_next);
        let k = ts.op.stiffness_diag();
        let diag = DMatrix::from_fn(n, n, |i, j| 1.0 + ts.h * (a.a11 * k[i] + a.a22 * k[j]));
        let out = linalg::pcg(
            |y| y + ts.op.apply_operator(ts.model, ts.t_next, y) * ts.h,
            &diag,
            &rhs,
            Some(y_prev),
            opts.cg_tol,
            opts.cg_max_iter,
        )?;
        Ok(out.solution)
    }
}
