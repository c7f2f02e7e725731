//! Dynamical low-rank time integration of anisotropic parabolic problems on
//! the unit square.
//!
//! The solution `u(x1, x2, t)` is expanded in the orthonormal Dirichlet sine
//! basis `phi_n(x) = sqrt(2) sin(n pi x)` in each direction, so a state is an
//! `N x N` coefficient matrix `Y` with `u = sum Y[i1, i2] phi_{i1} (x) phi_{i2}`.
//! Low-rank states keep `Y = U S V^T` in factored form on the fixed-rank
//! manifold.
//!
//! Module map:
//!
//! * [`manifold`]: fixed-rank states, truncated SVD, tangent projections.
//! * [`galerkin`]: sine-Galerkin operator with Kronecker structure, norms,
//!   diffusion coefficients and separable sources.
//! * [`stepper`]: full-rank backward Euler, the variational step solved by
//!   alternating least squares, the projector-splitting Euler step and the
//!   trajectory driver.
//! * [`analysis`]: energy audits, interpolant identity, randomized geometry
//!   suites, equivalence checks and convergence studies.
//! * [`runner`]: config parsing and batch experiment execution used by the CLI.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod galerkin;
pub mod linalg;
pub mod manifold;
pub mod runner;
pub mod stepper;

pub use error::{Error, Result};
pub use galerkin::{DiffusionModel, GalerkinOperator, SourceSpec, SourceTerm, TimeProfile};
pub use manifold::{LowRankState, TangentVector};
pub use stepper::{Method, Problem, StepDiagnostics, StepOptions, Trajectory};
