//! Fixed-rank coefficient matrices `Y = U S V^T`.
//!
//! `U` spans the `x1` directions and `V` the `x2` directions of the sine
//! basis. The core `S` is a general invertible `r x r` matrix; only
//! [`factorize`] produces a diagonal one. Vectorization is column-major, so
//! `vec(U S V^T) = (V (x) U) vec(S)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Default relative rank floor: `sigma_r` (or an `R` diagonal) below
/// `RANK_FLOOR_REL * sigma_1` counts as rank loss.
pub const RANK_FLOOR_REL: f64 = 1e-12;

/// Tolerance on `max |U^T U - I|` accepted by [`LowRankState::new`].
pub const ORTHONORMALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankState {
    u1: DMatrix<f64>,
    core: DMatrix<f64>,
    u2: DMatrix<f64>,
}

impl LowRankState {
    /// Builds a state and checks every invariant: shapes, orthonormal factors
    /// and a nonsingular core.
    pub fn new(u1: DMatrix<f64>, core: DMatrix<f64>, u2: DMatrix<f64>) -> Result<Self> {
        let state = Self::from_parts(u1, core, u2)?;
        let defect = state.orthonormality_defect();
        if defect > ORTHONORMALITY_TOL {
            return Err(Error::Precondition(format!(
                "factors are not orthonormal (defect {defect:e})"
            )));
        }
        let sigma_r = state.smallest_singular();
        if !(sigma_r > 0.0) {
            return Err(Error::RankDeficient {
                context: "state core",
                index: state.rank() - 1,
                value: sigma_r,
                floor: 0.0,
            });
        }
        Ok(state)
    }

    /// Builds a state checking shapes and finiteness only. Factors may be
    /// non-orthonormal; see [`reorthonormalize`].
    pub fn from_parts(u1: DMatrix<f64>, core: DMatrix<f64>, u2: DMatrix<f64>) -> Result<Self> {
        let (n, r) = u1.shape();
        if r == 0 || n == 0 {
            return Err(Error::InvalidArgument("rank and basis size must be positive".into()));
        }
        if r > n {
            return Err(Error::InvalidArgument(format!("rank {r} exceeds basis size {n}")));
        }
        if u2.shape() != (n, r) || core.shape() != (r, r) {
            return Err(Error::Shape(format!(
                "expected U {n}x{r}, S {r}x{r}, V {n}x{r}; got V {:?}, S {:?}",
                u2.shape(),
                core.shape()
            )));
        }
        if u1.iter().chain(core.iter()).chain(u2.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("low-rank state"));
        }
        Ok(Self { u1, core, u2 })
    }

    /// Rank-one state `s * a b^T` (vectors are normalized internally).
    pub fn rank_one(a: &DVector<f64>, s: f64, b: &DVector<f64>) -> Result<Self> {
        let (na, nb) = (a.norm(), b.norm());
        if a.len() != b.len() {
            return Err(Error::Shape("rank-one factors differ in length".into()));
        }
        if na == 0.0 || nb == 0.0 {
            return Err(Error::InvalidArgument("rank-one factor is zero".into()));
        }
        let u = DMatrix::from_column_slice(a.len(), 1, (a / na).as_slice());
        let v = DMatrix::from_column_slice(b.len(), 1, (b / nb).as_slice());
        Self::new(u, DMatrix::from_element(1, 1, s * na * nb), v)
    }

    pub fn rank(&self) -> usize {
        self.u1.ncols()
    }

    pub fn basis_dim(&self) -> usize {
        self.u1.nrows()
    }

    pub fn u1_factors(&self) -> &DMatrix<f64> {
        &self.u1
    }

    pub fn core(&self) -> &DMatrix<f64> {
        &self.core
    }

    pub fn u2_factors(&self) -> &DMatrix<f64> {
        &self.u2
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        (self.u1, self.core, self.u2)
    }

    /// Dense coefficient matrix `U S V^T`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.u1 * &self.core * self.u2.transpose()
    }

    /// Singular values of the state (those of the core, for orthonormal
    /// factors), in decreasing order.
    pub fn singular_values(&self) -> DVector<f64> {
        linalg::singular_values(&self.core)
    }

    /// `sigma_r`, the Frobenius distance to the matrices of rank `< r`.
    pub fn smallest_singular(&self) -> f64 {
        self.singular_values()[self.rank() - 1]
    }

    pub fn largest_singular(&self) -> f64 {
        self.singular_values()[0]
    }

    /// `max(|U^T U - I|, |V^T V - I|)` entrywise.
    pub fn orthonormality_defect(&self) -> f64 {
        let id = DMatrix::<f64>::identity(self.rank(), self.rank());
        let d1 = (self.u1.transpose() * &self.u1 - &id).amax();
        let d2 = (self.u2.transpose() * &self.u2 - &id).amax();
        d1.max(d2)
    }

    /// `c * u` for `c > 0`; the manifold is a cone.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            u1: self.u1.clone(),
            core: &self.core * c,
            u2: self.u2.clone(),
        }
    }

    /// Frobenius norm of the represented matrix, computed from the factors.
    pub fn h_norm(&self) -> f64 {
        self.core.norm()
    }
}

/// Rank-`r` truncated SVD of `y`, with the default relative rank floor.
pub fn factorize(y: &DMatrix<f64>, r: usize) -> Result<LowRankState> {
    factorize_with_floor(y, r, RANK_FLOOR_REL)
}

/// Rank-`r` truncated SVD of `y`. Fails when `sigma_r(y) < floor_rel * sigma_1(y)`.
pub fn factorize_with_floor(y: &DMatrix<f64>, r: usize, floor_rel: f64) -> Result<LowRankState> {
    let (n, m) = y.shape();
    if n != m {
        return Err(Error::Shape(format!("coefficient matrix must be square, got {n}x{m}")));
    }
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!("rank {r} outside 1..={n}")));
    }
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("factorize input"));
    }
    let (u, s, v) = linalg::svd_sorted(y);
    let floor = floor_rel * s[0];
    if !(s[r - 1] > floor) {
        return Err(Error::RankDeficient {
            context: "truncated SVD",
            index: r - 1,
            value: s[r - 1],
            floor,
        });
    }
    let core = DMatrix::from_diagonal(&s.rows(0, r).into_owned());
    Ok(LowRankState {
        u1: u.columns(0, r).into_owned(),
        core,
        u2: v.columns(0, r).into_owned(),
    })
}

/// Tangent-space projection `P_u Z = P1 Z + Z P2 - P1 Z P2` with
/// `P1 = U U^T`, `P2 = V V^T`.
pub fn tangent_project(state: &LowRankState, z: &DMatrix<f64>) -> DMatrix<f64> {
    let u = &state.u1;
    let v = &state.u2;
    let utz = u.transpose() * z;
    let zv = z * v;
    let utzv = &utz * v;
    u * &utz + &zv * v.transpose() - u * utzv * v.transpose()
}

/// `sigma_r` of the state.
pub fn smallest_singular(state: &LowRankState) -> f64 {
    state.smallest_singular()
}

/// Restores orthonormal factors by QR on both sides, absorbing the triangular
/// factors into the core: `U S V^T = Q1 (R1 S R2^T) Q2^T`.
pub fn reorthonormalize(state: &LowRankState) -> Result<LowRankState> {
    reorthonormalize_with_floor(state, RANK_FLOOR_REL)
}

pub fn reorthonormalize_with_floor(state: &LowRankState, floor_rel: f64) -> Result<LowRankState> {
    let (q1, r1) = linalg::qr_full_rank(&state.u1, floor_rel, "reorthonormalize (U)")?;
    let (q2, r2) = linalg::qr_full_rank(&state.u2, floor_rel, "reorthonormalize (V)")?;
    let core = r1 * &state.core * r2.transpose();
    let out = LowRankState { u1: q1, core, u2: q2 };
    let s = out.singular_values();
    let floor = floor_rel * s[0];
    let r = out.rank();
    if !(s[r - 1] > floor) {
        return Err(Error::RankDeficient {
            context: "reorthonormalize (core)",
            index: r - 1,
            value: s[r - 1],
            floor,
        });
    }
    Ok(out)
}

/// Tangent vector `v = sum_k v1_k (x) u2_k + u1_k (x) v2_k` at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: LowRankState,
    pub v1_parts: DMatrix<f64>,
    pub v2_parts: DMatrix<f64>,
    /// Set when `v1_parts^T U = 0` (gauge on the `x1` side).
    pub gauge_satisfied: bool,
}

impl TangentVector {
    pub fn new(base: LowRankState, v1_parts: DMatrix<f64>, v2_parts: DMatrix<f64>) -> Result<Self> {
        let shape = base.u1.shape();
        if v1_parts.shape() != shape || v2_parts.shape() != shape {
            return Err(Error::Shape("tangent parts must match factor shapes".into()));
        }
        let gauge = (v1_parts.transpose() * &base.u1).amax() <= ORTHONORMALITY_TOL * (1.0 + v1_parts.amax());
        Ok(Self {
            base,
            v1_parts,
            v2_parts,
            gauge_satisfied: gauge,
        })
    }

    /// Gauged decomposition of `P_u Z`: `v1 = (I - U U^T) Z V`, `v2 = Z^T U`.
    pub fn from_ambient(base: &LowRankState, z: &DMatrix<f64>) -> Self {
        let u = &base.u1;
        let v = &base.u2;
        let zv = z * v;
        let v1 = &zv - u * (u.transpose() * &zv);
        let v2 = z.transpose() * u;
        Self {
            base: base.clone(),
            v1_parts: v1,
            v2_parts: v2,
            gauge_satisfied: true,
        }
    }

    /// Dense form `V1 V^T + U V2^T`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.v1_parts * self.base.u2.transpose() + &self.base.u1 * self.v2_parts.transpose()
    }
}

/// Dimension of the tangent space of rank-`r` `n x n` matrices.
pub fn tangent_dim(n: usize, r: usize) -> usize {
    r * (2 * n - r)
}
