//! Dense helpers on top of nalgebra: sign-normalized QR and SVD, Kronecker
//! products, SPD solves and a matrix-shaped preconditioned CG.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Frobenius inner product `<A, B>_F`.
pub fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn frob_norm(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

/// Thin QR `A = Q R` with the diagonal of `R` made nonnegative.
pub fn qr_nonneg(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for k in 0..r.nrows() {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
            r.row_mut(k).neg_mut();
        }
    }
    (q, r)
}

/// Thin QR that refuses rank-deficient input: every `R[k, k]` must be at least
/// `floor_rel` times the largest diagonal entry.
pub fn qr_full_rank(a: &DMatrix<f64>, floor_rel: f64, context: &'static str) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(context));
    }
    let (q, r) = qr_nonneg(a);
    let scale = (0..r.nrows()).map(|k| r[(k, k)]).fold(0.0_f64, f64::max);
    let floor = floor_rel * scale;
    for k in 0..r.nrows() {
        let d = r[(k, k)];
        if !(d > floor) {
            return Err(Error::RankDeficient {
                context,
                index: k,
                value: d,
                floor,
            });
        }
    }
    Ok((q, r))
}

/// Full SVD `A = U diag(s) V^T` with singular values sorted in decreasing
/// order and the first non-negligible entry of each left singular vector
/// made nonnegative (the matching right vector is flipped with it).
pub fn svd_sorted(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = a.clone().svd(true, true);
    let mut s = svd.singular_values.clone();
    let mut u = svd.u.expect("u requested");
    let mut v = svd.v_t.expect("v_t requested").transpose();

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap_or(std::cmp::Ordering::Equal));
    if order.iter().enumerate().any(|(k, &i)| k != i) {
        let (u0, s0, v0) = (u.clone(), s.clone(), v.clone());
        for (k, &i) in order.iter().enumerate() {
            u.set_column(k, &u0.column(i));
            v.set_column(k, &v0.column(i));
            s[k] = s0[i];
        }
    }

    for k in 0..s.len() {
        let col = u.column(k);
        let tiny = 1e-12 * col.amax();
        if let Some(first) = col.iter().copied().find(|x| x.abs() > tiny) {
            if first < 0.0 {
                u.column_mut(k).neg_mut();
                v.column_mut(k).neg_mut();
            }
        }
    }
    (u, s, v)
}

pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    let mut s = a.singular_values();
    s.as_mut_slice()
        .sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

/// Kronecker product `A (x) B`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Column-major vectorization.
pub fn vec(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

pub fn unvec(v: &DVector<f64>, nrows: usize, ncols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(nrows, ncols, v.as_slice())
}

/// Solves `M x = b` for symmetric positive definite `M` by Cholesky.
pub fn spd_solve(m: &DMatrix<f64>, b: &DVector<f64>, context: &'static str) -> Result<DVector<f64>> {
    let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite(context))?;
    let x = chol.solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(context));
    }
    Ok(x)
}

/// Least-squares solution of a consistent overdetermined system via QR.
pub fn lstsq(b_mat: &DMatrix<f64>, rhs: &DVector<f64>, context: &'static str) -> Result<DVector<f64>> {
    let (q, r) = qr_nonneg(b_mat);
    let qtb = q.transpose() * rhs;
    let x = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::NotPositiveDefinite(context))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(context));
    }
    Ok(x)
}

/// Outcome of a CG solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: DMatrix<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradient for a symmetric positive definite
/// operator acting on matrices, with a pointwise (diagonal) preconditioner.
///
/// Stops once `||b - A x||_F <= tol ||b||_F`.
pub fn pcg<F>(
    apply: F,
    diag: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    x0: Option<&DMatrix<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    F: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    let b_norm = rhs.norm();
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            solution: DMatrix::zeros(rhs.nrows(), rhs.ncols()),
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut x = match x0 {
        Some(x0) => x0.clone(),
        None => DMatrix::zeros(rhs.nrows(), rhs.ncols()),
    };
    let mut r = rhs - apply(&x);
    let mut z = r.component_div(diag);
    let mut p = z.clone();
    let mut rz = frob_inner(&r, &z);
    let mut res = r.norm() / b_norm;
    let mut it = 0;
    while res > tol {
        if it >= max_iter {
            return Err(Error::NotConverged {
                solver: "conjugate gradient",
                iterations: it,
                residual: res,
            });
        }
        let ap = apply(&p);
        let pap = frob_inner(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite("conjugate gradient"));
        }
        let step = rz / pap;
        x += &p * step;
        r -= &ap * step;
        z = r.component_div(diag);
        let rz_new = frob_inner(&r, &z);
        p = &z + &p * (rz_new / rz);
        rz = rz_new;
        res = r.norm() / b_norm;
        it += 1;
    }
    Ok(CgOutcome {
        solution: x,
        iterations: it,
        relative_residual: res,
    })
}
