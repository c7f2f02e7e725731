//! Sine-Galerkin semidiscretization of `u_t - div(alpha(t) grad u) = f` on the
//! unit square with homogeneous Dirichlet data.
//!
//! With `phi_n(x) = sqrt(2) sin(n pi x)` the 1D stiffness matrix is
//! `diag((n pi)^2)` and the gradient coupling `G[i, j] = int phi_j' phi_i`
//! equals `4 i j / (i^2 - j^2)` when `i + j` is odd and zero otherwise. On a
//! coefficient matrix `Y` the operator acts as
//!
//! ```text
//! A(t) Y = a11 K Y + a22 Y K + (a12 + a21) G Y G
//! ```
//!
//! where the first two terms are the divergence part `A1` and the last one
//! the mixed-derivative part `A2`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, frob_inner};
use crate::manifold::{self, LowRankState};

/// Symmetric 2x2 diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Alpha {
    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Self { a11, a12, a22 }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let rad = (0.25 * (self.a11 - self.a22).powi(2) + self.a12 * self.a12).sqrt();
        (mean - rad, mean + rad)
    }

    /// `a12 + a21`, the weight of the mixed term.
    pub fn mixed_sum(&self) -> f64 {
        2.0 * self.a12
    }

    pub fn is_diagonal(&self) -> bool {
        self.a12 == 0.0
    }

    /// Spectral norm of `self - other`.
    pub fn distance(&self, other: &Alpha) -> f64 {
        let d = Alpha::new(self.a11 - other.a11, self.a12 - other.a12, self.a22 - other.a22);
        let (lo, hi) = d.eigenvalues();
        lo.abs().max(hi.abs())
    }
}

/// Time dependence of the diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaFamily {
    Constant(Alpha),
    /// `alpha(t) = R(omega t)^T diag(lambda1, lambda2) R(omega t)` with the
    /// planar rotation `R`.
    Rotation {
        lambda1: f64,
        lambda2: f64,
        omega: f64,
    },
}

/// Time-dependent symmetric positive definite coefficient with its bounds.
///
/// `mu` and `beta` bound the eigenvalues of `alpha(t)` from below and above,
/// and `lipschitz_t` bounds the spectral-norm Lipschitz quotient of
/// `t -> alpha(t)`, so that `|a(u,v;t) - a(u,v;s)| <= lipschitz_t |t-s| |u|_V |v|_V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionModel {
    pub family: AlphaFamily,
    pub mu: f64,
    pub beta: f64,
    pub lipschitz_t: f64,
}

impl DiffusionModel {
    pub fn constant(alpha: Alpha) -> Result<Self> {
        let (lo, hi) = alpha.eigenvalues();
        if !(lo > 0.0) || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "diffusion coefficient is not positive definite (eigenvalues {lo}, {hi})"
            )));
        }
        Ok(Self {
            family: AlphaFamily::Constant(alpha),
            mu: lo,
            beta: hi,
            lipschitz_t: 0.0,
        })
    }

    pub fn identity() -> Self {
        Self::constant(Alpha::identity()).expect("identity is SPD")
    }

    pub fn rotation(lambda1: f64, lambda2: f64, omega: f64) -> Result<Self> {
        if !(lambda1 > 0.0 && lambda2 > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "rotation family needs positive eigenvalues, got {lambda1}, {lambda2}"
            )));
        }
        Ok(Self {
            family: AlphaFamily::Rotation {
                lambda1,
                lambda2,
                omega,
            },
            mu: lambda1.min(lambda2),
            beta: lambda1.max(lambda2),
            lipschitz_t: omega.abs() * (lambda1 - lambda2).abs(),
        })
    }

    pub fn alpha(&self, t: f64) -> Alpha {
        match self.family {
            AlphaFamily::Constant(a) => a,
            AlphaFamily::Rotation {
                lambda1,
                lambda2,
                omega,
            } => {
                let (s, c) = (omega * t).sin_cos();
                // R = [[c, -s], [s, c]];  R^T D R
                Alpha::new(
                    lambda1 * c * c + lambda2 * s * s,
                    (lambda2 - lambda1) * c * s,
                    lambda1 * s * s + lambda2 * c * c,
                )
            }
        }
    }

    /// True for a time-independent coefficient without mixed terms.
    pub fn is_constant_diagonal(&self) -> bool {
        matches!(self.family, AlphaFamily::Constant(a) if a.is_diagonal())
    }

    /// Samples `alpha` on `samples + 1` uniform points of `[0, t_final]` and
    /// checks symmetry-derived bounds and the Lipschitz constant.
    pub fn validate(&self, t_final: f64, samples: usize) -> Result<()> {
        let samples = samples.max(1);
        let dt = t_final / samples as f64;
        let mut prev: Option<Alpha> = None;
        for k in 0..=samples {
            let a = self.alpha(k as f64 * dt);
            let (lo, hi) = a.eigenvalues();
            let tol = 1e-12 * self.beta;
            if lo < self.mu - tol || hi > self.beta + tol || !(lo > 0.0) {
                return Err(Error::Precondition(format!(
                    "alpha({}) has eigenvalues ({lo}, {hi}) outside [{}, {}]",
                    k as f64 * dt,
                    self.mu,
                    self.beta
                )));
            }
            if let Some(p) = prev {
                if dt > 0.0 {
                    let q = a.distance(&p) / dt;
                    if q > self.lipschitz_t * (1.0 + 1e-6) + 1e-12 {
                        return Err(Error::Precondition(format!(
                            "Lipschitz quotient {q} exceeds {}",
                            self.lipschitz_t
                        )));
                    }
                }
            }
            prev = Some(a);
        }
        Ok(())
    }
}

/// Galerkin matrices of the sine basis and Kronecker-structured operator
/// application on `N x N` coefficient matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinOperator {
    basis_dim: usize,
    stiffness: DVector<f64>,
    grad_coupling: DMatrix<f64>,
    v_weights: DMatrix<f64>,
}

impl GalerkinOperator {
    pub fn build(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("basis size must be at least 1".into()));
        }
        let stiffness = DVector::from_fn(n, |i, _| ((i + 1) as f64 * PI).powi(2));
        let grad_coupling = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = ((i + 1) as f64, (j + 1) as f64);
            if (i + j) % 2 == 1 {
                4.0 * a * b / (a * a - b * b)
            } else {
                0.0
            }
        });
        let v_weights = DMatrix::from_fn(n, n, |i, j| stiffness[i] + stiffness[j]);
        let op = Self {
            basis_dim: n,
            stiffness,
            grad_coupling,
            v_weights,
        };
        #[cfg(debug_assertions)]
        op.check_against_quadrature();
        Ok(op)
    }

    #[cfg(debug_assertions)]
    fn check_against_quadrature(&self) {
        let m = self.basis_dim.min(6);
        for i in 0..m {
            for j in 0..m {
                let (a, b) = ((i + 1) as f64 * PI, (j + 1) as f64 * PI);
                let k = gauss_legendre(|x| 2.0 * a * b * (a * x).cos() * (b * x).cos(), 64);
                let g = gauss_legendre(|x| 2.0 * b * (b * x).cos() * (a * x).sin(), 64);
                let k_exact = if i == j { self.stiffness[i] } else { 0.0 };
                debug_assert!((k - k_exact).abs() < 1e-9 * (1.0 + k_exact));
                debug_assert!((g - self.grad_coupling[(i, j)]).abs() < 1e-9);
            }
        }
    }

    pub fn basis_dim(&self) -> usize {
        self.basis_dim
    }

    /// Diagonal of the 1D stiffness matrix, `(n pi)^2`.
    pub fn stiffness_diag(&self) -> &DVector<f64> {
        &self.stiffness
    }

    pub fn stiffness_1d(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.stiffness)
    }

    pub fn grad_coupling_1d(&self) -> &DMatrix<f64> {
        &self.grad_coupling
    }

    /// `(n1 pi)^2 + (n2 pi)^2`.
    pub fn v_weights(&self) -> &DMatrix<f64> {
        &self.v_weights
    }

    fn check_shape(&self, y: &DMatrix<f64>) {
        assert_eq!(
            y.shape(),
            (self.basis_dim, self.basis_dim),
            "coefficient matrix shape does not match the basis"
        );
    }

    /// `K Y` with the diagonal stiffness `K`.
    pub fn stiff_left(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = y.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row *= self.stiffness[i];
        }
        out
    }

    /// `Y K`.
    pub fn stiff_right(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = y.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= self.stiffness[j];
        }
        out
    }

    /// Divergence part: `a11 K Y + a22 Y K`.
    pub fn apply_a1(&self, model: &DiffusionModel, t: f64, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.check_shape(y);
        let a = model.alpha(t);
        self.stiff_left(y) * a.a11 + self.stiff_right(y) * a.a22
    }

    /// Mixed-derivative part: `(a12 + a21) G Y G`.
    pub fn apply_a2(&self, model: &DiffusionModel, t: f64, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.check_shape(y);
        let c = model.alpha(t).mixed_sum();
        if c == 0.0 {
            return DMatrix::zeros(self.basis_dim, self.basis_dim);
        }
        (&self.grad_coupling * y * &self.grad_coupling) * c
    }

    pub fn apply_operator(&self, model: &DiffusionModel, t: f64, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.apply_a1(model, t, y) + self.apply_a2(model, t, y)
    }

    /// `a(Y, Z; t) = <A(t) Y, Z>_F`.
    pub fn bilinear_a(&self, model: &DiffusionModel, t: f64, y: &DMatrix<f64>, z: &DMatrix<f64>) -> f64 {
        frob_inner(&self.apply_operator(model, t, y), z)
    }

    pub fn bilinear_a1(&self, model: &DiffusionModel, t: f64, y: &DMatrix<f64>, z: &DMatrix<f64>) -> f64 {
        frob_inner(&self.apply_a1(model, t, y), z)
    }

    /// `|grad u|_{L2}`.
    pub fn v_norm(&self, y: &DMatrix<f64>) -> f64 {
        self.check_shape(y);
        y.iter()
            .zip(self.v_weights.iter())
            .map(|(c, w)| w * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Dual norm with respect to [`Self::v_norm`].
    pub fn v_dual_norm(&self, y: &DMatrix<f64>) -> f64 {
        self.check_shape(y);
        y.iter()
            .zip(self.v_weights.iter())
            .map(|(c, w)| c * c / w)
            .sum::<f64>()
            .sqrt()
    }

    /// `|d1 d2 u|_{L2} = (sum (n1 pi)^2 (n2 pi)^2 Y^2)^{1/2}`.
    pub fn mixed_seminorm(&self, y: &DMatrix<f64>) -> f64 {
        self.check_shape(y);
        let mut acc = 0.0;
        for j in 0..self.basis_dim {
            for i in 0..self.basis_dim {
                acc += self.stiffness[i] * self.stiffness[j] * y[(i, j)].powi(2);
            }
        }
        acc.sqrt()
    }

    /// 1D `H^1_0` seminorm of a coefficient vector, `(sum (n pi)^2 c_n^2)^{1/2}`.
    pub fn seminorm_1d(&self, c: &[f64]) -> f64 {
        c.iter()
            .zip(self.stiffness.iter())
            .map(|(x, k)| k * x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Assembled `N^2 x N^2` matrix of `A(t)` acting on column-major `vec(Y)`.
    pub fn assemble_dense(&self, model: &DiffusionModel, t: f64) -> DMatrix<f64> {
        let a = model.alpha(t);
        let n = self.basis_dim;
        let id = DMatrix::<f64>::identity(n, n);
        let k = self.stiffness_1d();
        let mut m = linalg::kron(&id, &k) * a.a11 + linalg::kron(&k, &id) * a.a22;
        let c = a.mixed_sum();
        if c != 0.0 {
            m += linalg::kron(&self.grad_coupling.transpose(), &self.grad_coupling) * c;
        }
        m
    }

    /// Semidiscrete exact solution of the homogeneous problem with a constant
    /// diagonal coefficient: `exp(-t a11 K) U S V^T exp(-t a22 K)`,
    /// refactorized to orthonormal factors.
    pub fn exact_diagonal_solution(&self, model: &DiffusionModel, u0: &LowRankState, t: f64) -> Result<LowRankState> {
        if !model.is_constant_diagonal() {
            return Err(Error::Precondition(
                "exact solution needs a constant diagonal coefficient".into(),
            ));
        }
        if u0.basis_dim() != self.basis_dim {
            return Err(Error::Shape("initial state does not match the basis".into()));
        }
        if t == 0.0 {
            return Ok(u0.clone());
        }
        let a = model.alpha(0.0);
        let mut u1 = u0.u1_factors().clone();
        let mut u2 = u0.u2_factors().clone();
        for i in 0..self.basis_dim {
            u1.row_mut(i).scale_mut((-t * a.a11 * self.stiffness[i]).exp());
            u2.row_mut(i).scale_mut((-t * a.a22 * self.stiffness[i]).exp());
        }
        // decay factors can reach ~1e-300; skip the relative floor here
        let decayed = LowRankState::from_parts(u1, u0.core().clone(), u2)?;
        manifold::reorthonormalize_with_floor(&decayed, 0.0)
    }
}

/// `||Y||_F`, the `L2` norm of the represented function.
pub fn h_norm(y: &DMatrix<f64>) -> f64 {
    y.norm()
}

/// Scalar time profile of a separable source term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeProfile {
    /// `c`
    Constant(f64),
    /// `c t`
    Linear(f64),
    /// `c cos(omega t)`
    Cosine { c: f64, omega: f64 },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant(c) => c,
            TimeProfile::Linear(c) => c * t,
            TimeProfile::Cosine { c, omega } => c * (omega * t).cos(),
        }
    }

    /// Exact mean over `[a, b]`.
    pub fn mean(&self, a: f64, b: f64) -> f64 {
        match *self {
            TimeProfile::Constant(c) => c,
            TimeProfile::Linear(c) => 0.5 * c * (a + b),
            TimeProfile::Cosine { c, omega } => {
                // (sin wb - sin wa) / (w (b - a)) = cos(w m) sinc(w d / 2)
                let half = 0.5 * omega * (b - a);
                let sinc = if half.abs() < 1e-8 {
                    1.0 - half * half / 6.0
                } else {
                    half.sin() / half
                };
                c * (omega * 0.5 * (a + b)).cos() * sinc
            }
        }
    }
}

/// One term `profile(t) p q^T` of a separable source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTerm {
    pub profile: TimeProfile,
    pub p: DVector<f64>,
    pub q: DVector<f64>,
}

/// Separable right-hand side `f(t) = sum_m profile_m(t) p_m q_m^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    basis_dim: usize,
    terms: Vec<SourceTerm>,
}

impl SourceSpec {
    pub fn zero(n: usize) -> Self {
        Self {
            basis_dim: n,
            terms: Vec::new(),
        }
    }

    pub fn new(n: usize, terms: Vec<SourceTerm>) -> Result<Self> {
        for t in &terms {
            if t.p.len() != n || t.q.len() != n {
                return Err(Error::Shape(format!("source vectors must have length {n}")));
            }
        }
        Ok(Self { basis_dim: n, terms })
    }

    pub fn terms(&self) -> &[SourceTerm] {
        &self.terms
    }

    pub fn basis_dim(&self) -> usize {
        self.basis_dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            basis_dim: self.basis_dim,
            terms: self
                .terms
                .iter()
                .map(|t| SourceTerm {
                    profile: t.profile,
                    p: &t.p * c,
                    q: t.q.clone(),
                })
                .collect(),
        }
    }

    pub fn evaluate(&self, t: f64) -> DMatrix<f64> {
        self.combine(|p| p.value(t))
    }

    /// Exact interval mean `(1/(b-a)) int_a^b f(t) dt`.
    pub fn rhs_mean(&self, a: f64, b: f64) -> DMatrix<f64> {
        assert!(a < b, "rhs_mean needs a < b");
        self.combine(|p| p.mean(a, b))
    }

    fn combine(&self, weight: impl Fn(&TimeProfile) -> f64) -> DMatrix<f64> {
        let mut f = DMatrix::zeros(self.basis_dim, self.basis_dim);
        for term in &self.terms {
            let w = weight(&term.profile);
            if w != 0.0 {
                f.ger(w, &term.p, &term.q, 1.0);
            }
        }
        f
    }
}

/// Composite 4-point Gauss-Legendre rule on `[0, 1]` with `panels` panels.
#[cfg(debug_assertions)]
fn gauss_legendre(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
    const X: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const W: [f64; 4] = [
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    let h = 1.0 / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for k in 0..4 {
            acc += W[k] * f(mid + 0.5 * h * X[k]);
        }
    }
    0.5 * h * acc
}
