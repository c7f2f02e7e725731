use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::frob_inner;
use crate::stepper::{Problem, Trajectory};

/// Relative round-off allowance of the audited inequalities.
const AUDIT_ROUND_OFF: f64 = 1e-12;

/// Per-step ledger entry; entry `i` describes the step `u_{i-1} -> u_i`
/// (entry 0 holds the initial state, with zero step quantities).
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyStep {
    pub step: usize,
    pub t: f64,
    pub h_norm_sq: f64,
    pub v_norm_sq: f64,
    /// `|(u_i - u_{i-1}) / h|_H^2`
    pub diff_quotient_sq: f64,
    /// `|f_i|_{V*}^2` of the interval mean
    pub source_dual_sq: f64,
    /// `|f_i|_H^2`
    pub source_h_sq: f64,
    /// `F_i(u_i)`
    pub objective: f64,
    /// `F_i(u_{i-1})`
    pub objective_start: f64,
    pub galerkin_residual: f64,
}

/// A failed inequality with the step it was detected at and the excess over
/// its allowed slack.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditViolation {
    pub audit: &'static str,
    pub step: usize,
    pub excess: f64,
}

/// Outcome of [`energy_audit`]. The three audits are
///
/// * (i) `|u_N|^2 + sum |u_i - u_{i-1}|^2 + h mu sum |u_i|_V^2
///   <= |u_0|^2 + (h/mu) sum |f_i|_{V*}^2`, checked per step and summed, with a
///   slack budget `sum 2 h res_i |u_i|_H` for inexact optimality;
/// * (ii) `F_i(u_i) <= F_i(u_{i-1})` per step and its consequence
///   `h |(u_i - u_{i-1})/h|^2 <= 2a(u_{i-1}, u_{i-1}; t_i) - 2a(u_i, u_i; t_i) + 4h |f_i|_H^2`;
/// * (iii) `mu |u_i|_V^2 <= beta |u_0|_V^2 + L h sum_{j<=i} |u_{j-1}|_V^2 + 2h sum_{j<=i} |f_j|_H^2`
///   with `L` the Lipschitz constant of the coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub steps: Vec<EnergyStep>,
    pub energy_lhs: f64,
    pub energy_rhs: f64,
    /// Slack granted to (i) for inexact optimality conditions.
    pub residual_budget: f64,
    /// `max(0, lhs - rhs - budget)` of the summed form of (i).
    pub energy_excess: f64,
    pub telescope_worst_excess: f64,
    pub boundedness_worst_excess: f64,
    pub objective_monotone: bool,
    /// `|u_i|_H` nonincreasing; only audited for a vanishing source.
    pub h_norm_monotone: Option<bool>,
    pub violations: Vec<AuditViolation>,
}

impl EnergyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audits a manifold trajectory against the discrete energy estimates.
pub fn energy_audit(traj: &Trajectory, problem: &Problem) -> Result<EnergyReport> {
    if traj.states.len() < 2 {
        return Err(Error::InvalidArgument("energy audit needs at least one step".into()));
    }
    if traj.diagnostics.len() + 1 != traj.states.len() {
        return Err(Error::InvalidArgument("trajectory diagnostics are incomplete".into()));
    }
    let op = &problem.op;
    let model = &problem.model;
    let (mu, beta, lip) = (model.mu, model.beta, model.lipschitz_t);
    let h = traj.h;
    let states = traj.dense_states();

    let u0 = &states[0];
    let mut steps = vec![EnergyStep {
        step: 0,
        t: 0.0,
        h_norm_sq: u0.norm_squared(),
        v_norm_sq: op.v_norm(u0).powi(2),
        diff_quotient_sq: 0.0,
        source_dual_sq: 0.0,
        source_h_sq: 0.0,
        objective: 0.0,
        objective_start: 0.0,
        galerkin_residual: 0.0,
    }];
    let mut violations = Vec::new();
    let mut lhs = 0.0;
    let mut rhs = u0.norm_squared();
    let mut budget = 0.0;
    let mut telescope_worst: f64 = 0.0;
    let mut bounded_worst: f64 = 0.0;
    let mut objective_monotone = true;
    let mut h_norm_monotone = true;
    let mut v_sum_prev = 0.0;
    let mut f_sum = 0.0;
    let v0_sq = op.v_norm(u0).powi(2);

    for i in 1..states.len() {
        let (prev, cur) = (&states[i - 1], &states[i]);
        let (t_prev, t) = (traj.times[i - 1], traj.times[i]);
        let f = problem.source.rhs_mean(t_prev, t);
        let d = cur - prev;
        let d_sq = d.norm_squared();
        let cur_h_sq = cur.norm_squared();
        let prev_h_sq = prev.norm_squared();
        let cur_v_sq = op.v_norm(cur).powi(2);
        let f_dual_sq = op.v_dual_norm(&f).powi(2);
        let f_h_sq = f.norm_squared();
        let res = traj.diagnostics[i - 1].galerkin_residual;

        // (i), single step
        let step_lhs = cur_h_sq - prev_h_sq + d_sq + h * mu * cur_v_sq;
        let step_rhs = h / mu * f_dual_sq;
        let step_budget = 2.0 * h * res * cur_h_sq.sqrt();
        let tol = AUDIT_ROUND_OFF * (cur_h_sq + prev_h_sq + h * mu * cur_v_sq + step_rhs);
        if step_lhs > step_rhs + step_budget + tol {
            violations.push(AuditViolation {
                audit: "energy_step",
                step: i,
                excess: step_lhs - step_rhs - step_budget,
            });
        }
        lhs += d_sq + h * mu * cur_v_sq;
        rhs += step_rhs;
        budget += step_budget;

        // (ii)
        let a_prev = op.bilinear_a(model, t, prev, prev);
        let a_cur = op.bilinear_a(model, t, cur, cur);
        let obj_start = 0.5 * a_prev - frob_inner(&f, prev);
        let objective = d_sq / (2.0 * h) + 0.5 * a_cur - frob_inner(&f, cur);
        let obj_scale = d_sq / (2.0 * h) + 0.5 * (a_prev + a_cur) + (f_h_sq * (prev_h_sq + cur_h_sq)).sqrt();
        if objective > obj_start + AUDIT_ROUND_OFF * obj_scale {
            objective_monotone = false;
            violations.push(AuditViolation {
                audit: "objective_monotone",
                step: i,
                excess: objective - obj_start,
            });
        }
        let tele = d_sq / h - (2.0 * a_prev - 2.0 * a_cur + 4.0 * h * f_h_sq);
        if tele > AUDIT_ROUND_OFF * obj_scale * 4.0 {
            violations.push(AuditViolation {
                audit: "telescope",
                step: i,
                excess: tele,
            });
        }
        telescope_worst = telescope_worst.max(tele);

        // (iii)
        v_sum_prev += op.v_norm(prev).powi(2);
        f_sum += f_h_sq;
        let bound = beta * v0_sq + lip * h * v_sum_prev + 2.0 * h * f_sum;
        let excess = mu * cur_v_sq - bound;
        if excess > AUDIT_ROUND_OFF * bound.max(mu * cur_v_sq) {
            violations.push(AuditViolation {
                audit: "boundedness",
                step: i,
                excess,
            });
        }
        bounded_worst = bounded_worst.max(excess);

        if problem.source.is_zero() && cur_h_sq.sqrt() > prev_h_sq.sqrt() * (1.0 + 1e-12) {
            h_norm_monotone = false;
            violations.push(AuditViolation {
                audit: "h_norm_monotone",
                step: i,
                excess: cur_h_sq.sqrt() - prev_h_sq.sqrt(),
            });
        }

        steps.push(EnergyStep {
            step: i,
            t,
            h_norm_sq: cur_h_sq,
            v_norm_sq: cur_v_sq,
            diff_quotient_sq: d_sq / (h * h),
            source_dual_sq: f_dual_sq,
            source_h_sq: f_h_sq,
            objective,
            objective_start: obj_start,
            galerkin_residual: res,
        });
    }
    lhs += states.last().expect("nonempty").norm_squared();
    let energy_excess = (lhs - rhs - budget).max(0.0);
    if lhs > rhs + budget + AUDIT_ROUND_OFF * (lhs + rhs) {
        violations.push(AuditViolation {
            audit: "energy_sum",
            step: states.len() - 1,
            excess: energy_excess,
        });
    }

    Ok(EnergyReport {
        steps,
        energy_lhs: lhs,
        energy_rhs: rhs,
        residual_budget: budget,
        energy_excess,
        telescope_worst_excess: telescope_worst.max(0.0),
        boundedness_worst_excess: bounded_worst.max(0.0),
        objective_monotone,
        h_norm_monotone: problem.source.is_zero().then_some(h_norm_monotone),
        violations,
    })
}

/// `int_0^T |u_hat(t) - v_hat(t)|_H^2 dt` for the piecewise-linear
/// interpolant `u_hat` and the piecewise-constant `v_hat = u_i` on
/// `(t_{i-1}, t_i]`, integrated exactly by two-point Gauss-Legendre per step.
pub fn interpolant_gap(traj: &Trajectory) -> f64 {
    interpolant_gap_of(&traj.times, &traj.dense_states())
}

pub fn interpolant_gap_of(times: &[f64], states: &[DMatrix<f64>]) -> f64 {
    assert_eq!(times.len(), states.len(), "one time per state");
    let g = 0.5 / 3f64.sqrt();
    let mut total = 0.0;
    for i in 1..states.len() {
        let (a, b) = (times[i - 1], times[i]);
        let len = b - a;
        let mut acc = 0.0;
        for x in [0.5 - g, 0.5 + g] {
            let t = a + x * len;
            let lin = &states[i - 1] + (&states[i] - &states[i - 1]) * ((t - a) / len);
            acc += (lin - &states[i]).norm_squared();
        }
        total += 0.5 * len * acc;
    }
    total
}

/// Closed form `(h/3) sum |u_i - u_{i-1}|_H^2` of the gap on uniform steps.
pub fn interpolant_gap_formula(traj: &Trajectory) -> f64 {
    let states = traj.dense_states();
    traj.h / 3.0 * states.windows(2).map(|w| (&w[1] - &w[0]).norm_squared()).sum::<f64>()
}
