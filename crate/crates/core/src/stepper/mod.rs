//! Time steppers for the semidiscrete problem `Y' + A(t) Y = F(t)`.
//!
//! Every step works on the backward-Euler objective
//!
//! ```text
//! F(y) = ||y - u_i||^2 / (2h) + a(y, y; t_{i+1}) / 2 - <f_{i+1}, y>
//! ```
//!
//! where `f_{i+1}` is the exact mean of the source over the step.
//! [`reference_step`] minimizes it over all matrices, [`als_variational_step`]
//! over rank-`r` matrices by alternating factor solves, and
//! [`splitting_euler_step`] runs the K/S/L substeps of the projector-splitting
//! scheme discretized by backward Euler.

mod als;
mod integrate;
mod reference;
mod splitting;

use nalgebra::DMatrix;

use crate::galerkin::{DiffusionModel, GalerkinOperator, SourceSpec};
use crate::linalg::frob_inner;
use crate::manifold::LowRankState;

pub use als::{als_variational_step, reduced_operator_matrix, FactorSide};
pub use integrate::{integrate, HaltRecord, Method, StepState, Trajectory};
pub use reference::reference_step;
pub use splitting::{splitting_euler_step, splitting_euler_step_with, CoreUpdate};

/// Inner linear solver for the per-step systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    /// Direct solve up to [`StepOptions::direct_max_unknowns`], CG above.
    Auto,
    Direct,
    ConjugateGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOptions {
    /// Relative iterate change at which ALS stops.
    pub als_tol: f64,
    pub als_max_sweeps: usize,
    pub inner_solver: InnerSolver,
    /// Relative residual target of CG solves.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Relative floor on `sigma_r / sigma_1` (and QR diagonals) below which
    /// the rank is considered lost.
    pub rank_floor_rel: f64,
    /// Forces exactly one ALS sweep.
    pub single_sweep_mode: bool,
    /// Largest number of unknowns solved densely under [`InnerSolver::Auto`].
    pub direct_max_unknowns: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            als_tol: 1e-11,
            als_max_sweeps: 100,
            inner_solver: InnerSolver::Auto,
            cg_tol: 1e-12,
            cg_max_iter: 5000,
            rank_floor_rel: crate::manifold::RANK_FLOOR_REL,
            single_sweep_mode: false,
            direct_max_unknowns: 2048,
        }
    }
}

impl StepOptions {
    pub fn direct() -> Self {
        Self {
            inner_solver: InnerSolver::Direct,
            ..Self::default()
        }
    }

    /// Relative floor on QR diagonals inside a step. Kept below the monitor
    /// floor so that slow rank decay is reported by the monitor between steps.
    pub(crate) fn qr_floor(&self) -> f64 {
        self.rank_floor_rel.min(1e-14)
    }

    pub(crate) fn use_direct(&self, unknowns: usize) -> bool {
        match self.inner_solver {
            InnerSolver::Direct => true,
            InnerSolver::ConjugateGradient => false,
            InnerSolver::Auto => unknowns <= self.direct_max_unknowns,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.als_tol > 0.0 && self.cg_tol > 0.0 && self.rank_floor_rel >= 0.0) {
            return Err(crate::Error::InvalidArgument("step tolerances must be positive".into()));
        }
        if self.als_max_sweeps == 0 || self.cg_max_iter == 0 {
            return Err(crate::Error::InvalidArgument(
                "iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-step record.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub sweeps_used: usize,
    /// Norm of the backward-Euler defect tested against the tangent space at
    /// the new state (the full defect for the reference solver).
    pub galerkin_residual: f64,
    /// `F(u_{i+1})`.
    pub objective_value: f64,
    /// `F(u_i)`, the objective at the starting point of the step.
    pub objective_start: f64,
    pub sigma_r: f64,
    pub objective_decreased: bool,
    /// ALS reached the stagnation tolerance (always true for one-shot steps).
    pub converged: bool,
    /// Sweep cap reached with a Galerkin residual above `1e3 * als_tol`
    /// relative to the size of the step data. Reported, not fatal.
    pub flagged: bool,
    /// Objective after each ALS half-sweep, starting with `F(u_i)`.
    pub half_sweep_objectives: Vec<f64>,
}

/// Data of one backward-Euler step from `t_i` to `t_next = t_i + h`.
#[derive(Debug, Clone, Copy)]
pub struct TimeStep<'a> {
    pub op: &'a GalerkinOperator,
    pub model: &'a DiffusionModel,
    pub h: f64,
    pub t_next: f64,
    /// Mean of the source over `[t_next - h, t_next]`.
    pub f_mean: &'a DMatrix<f64>,
}

impl TimeStep<'_> {
    /// The step objective `F(y)` anchored at `prev`.
    pub fn objective(&self, prev: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        let d = y - prev;
        frob_inner(&d, &d) / (2.0 * self.h) + 0.5 * self.op.bilinear_a(self.model, self.t_next, y, y)
            - frob_inner(self.f_mean, y)
    }

    /// Backward-Euler defect `(y - prev)/h + A(t_next) y - f`.
    pub fn defect(&self, prev: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
        (y - prev) / self.h + self.op.apply_operator(self.model, self.t_next, y) - self.f_mean
    }

    pub(crate) fn check(&self) -> crate::Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(crate::Error::InvalidArgument(format!(
                "step size must be positive, got {}",
                self.h
            )));
        }
        let n = self.op.basis_dim();
        if self.f_mean.shape() != (n, n) {
            return Err(crate::Error::Shape("source mean does not match the basis".into()));
        }
        Ok(())
    }
}

/// Galerkin operator, coefficient and source of a run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub op: GalerkinOperator,
    pub model: DiffusionModel,
    pub source: SourceSpec,
}

impl Problem {
    pub fn new(op: GalerkinOperator, model: DiffusionModel, source: SourceSpec) -> crate::Result<Self> {
        if source.basis_dim() != op.basis_dim() {
            return Err(crate::Error::Shape("source and operator sizes differ".into()));
        }
        Ok(Self { op, model, source })
    }

    /// Homogeneous problem with `N` modes.
    pub fn homogeneous(n: usize, model: DiffusionModel) -> crate::Result<Self> {
        Self::new(GalerkinOperator::build(n)?, model, SourceSpec::zero(n))
    }
}

/// `after <= before` up to a few ulps of the objective scale.
pub(crate) fn not_increased(after: f64, before: f64) -> bool {
    after <= before + 1e-13 * before.abs().max(after.abs())
}

/// Norm of the functional `v -> <defect, v>` on `T_{u_next} M_r`, taken in an
/// orthonormal basis of the tangent space built from `U`, `V` and their
/// complements: `{u_k v_l^T}`, `{(I - UU^T) e_a v_l^T}`, `{u_k e_b^T (I - VV^T)}`.
pub fn galerkin_residual(ts: &TimeStep<'_>, u_next: &LowRankState, u_prev: &DMatrix<f64>) -> f64 {
    let d = ts.defect(u_prev, &u_next.to_dense());
    tangent_component_norm(u_next, &d)
}

pub(crate) fn tangent_component_norm(state: &LowRankState, d: &DMatrix<f64>) -> f64 {
    let u = state.u1_factors();
    let v = state.u2_factors();
    let dv = d * v;
    let utd = u.transpose() * d;
    let core = &utd * v;
    let left = &dv - u * &core;
    let right = &utd - &core * v.transpose();
    (core.norm_squared() + left.norm_squared() + right.norm_squared()).sqrt()
}
