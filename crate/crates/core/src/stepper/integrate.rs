use nalgebra::DMatrix;

use super::{
    als_variational_step, reference_step, splitting_euler_step, Problem, StepDiagnostics, StepOptions, TimeStep,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::LowRankState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Full-space backward Euler.
    Reference,
    /// Variational backward Euler on the rank-`r` manifold, solved by ALS.
    Als,
    /// Projector-splitting Euler step.
    Splitting,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Reference => "reference",
            Method::Als => "als",
            Method::Splitting => "splitting",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "reference" => Some(Method::Reference),
            "als" => Some(Method::Als),
            "splitting" => Some(Method::Splitting),
            _ => None,
        }
    }
}

/// A state of a trajectory: factored on the manifold, dense for the
/// reference solver.
#[derive(Debug, Clone, PartialEq)]
pub enum StepState {
    LowRank(LowRankState),
    Dense(DMatrix<f64>),
}

impl StepState {
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            StepState::LowRank(s) => s.to_dense(),
            StepState::Dense(y) => y.clone(),
        }
    }

    pub fn as_low_rank(&self) -> Option<&LowRankState> {
        match self {
            StepState::LowRank(s) => Some(s),
            StepState::Dense(_) => None,
        }
    }

    /// `(sigma_1, sigma_r)` with `r` the tracked rank.
    pub fn extreme_singular(&self, r: usize) -> (f64, f64) {
        match self {
            StepState::LowRank(s) => (s.largest_singular(), s.smallest_singular()),
            StepState::Dense(y) => {
                let s = linalg::singular_values(y);
                (s[0], s[r - 1])
            }
        }
    }
}

/// Why and where integration stopped before the final time.
#[derive(Debug, Clone, PartialEq)]
pub struct HaltRecord {
    /// Index of the step that could not be completed (the state at
    /// `step_index` is the last one kept).
    pub step_index: usize,
    pub time: f64,
    pub sigma_r: f64,
    pub sigma_1: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub method: Method,
    pub h: f64,
    pub rank: usize,
    /// `times[i] = i h`; one entry per stored state.
    pub times: Vec<f64>,
    pub states: Vec<StepState>,
    /// `diagnostics[i]` describes the step producing `states[i + 1]`.
    pub diagnostics: Vec<StepDiagnostics>,
    pub halted: Option<HaltRecord>,
}

impl Trajectory {
    pub fn final_state(&self) -> &StepState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }

    pub fn dense_states(&self) -> Vec<DMatrix<f64>> {
        self.states.iter().map(StepState::to_dense).collect()
    }

    pub fn completed(&self) -> bool {
        self.halted.is_none()
    }
}

/// Integrates from `u0` at `t = 0` to `t_final` with `n_steps` uniform steps.
///
/// Before every step the monitor checks `sigma_r < rank_floor_rel * sigma_1`
/// on the current state; a violation, or a rank collapse detected inside a
/// step, ends the run early with a [`HaltRecord`] instead of an error. Other
/// failures (non-convergence, non-finite values) are returned as errors.
pub fn integrate(
    problem: &Problem,
    method: Method,
    u0: &LowRankState,
    t_final: f64,
    n_steps: usize,
    opts: &StepOptions,
) -> Result<Trajectory> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "final time must be positive, got {t_final}"
        )));
    }
    if n_steps == 0 {
        return Err(Error::InvalidArgument("number of steps must be at least 1".into()));
    }
    if u0.basis_dim() != problem.op.basis_dim() {
        return Err(Error::Shape("initial state does not match the basis".into()));
    }
    opts.validate()?;
    let h = t_final / n_steps as f64;
    let rank = u0.rank();
    let initial = match method {
        Method::Reference => StepState::Dense(u0.to_dense()),
        _ => StepState::LowRank(u0.clone()),
    };
    let mut traj = Trajectory {
        method,
        h,
        rank,
        times: vec![0.0],
        states: vec![initial],
        diagnostics: Vec::with_capacity(n_steps),
        halted: None,
    };

    for i in 0..n_steps {
        let t_prev = i as f64 * h;
        let t_next = (i + 1) as f64 * h;
        let current = traj.states.last().expect("nonempty");
        let (sigma_1, sigma_r) = current.extreme_singular(rank);
        if method != Method::Reference && !(sigma_r >= opts.rank_floor_rel * sigma_1) {
            traj.halted = Some(HaltRecord {
                step_index: i,
                time: t_prev,
                sigma_r,
                sigma_1,
                reason: format!(
                    "sigma_r/sigma_1 = {:e} below floor {:e}",
                    sigma_r / sigma_1,
                    opts.rank_floor_rel
                ),
            });
            break;
        }
        let f_mean = problem.source.rhs_mean(t_prev, t_next);
        let ts = TimeStep {
            op: &problem.op,
            model: &problem.model,
            h,
            t_next,
            f_mean: &f_mean,
        };
        let outcome = match (method, current) {
            (Method::Reference, StepState::Dense(y)) => reference_step(&ts, y, opts).map(|y_next| {
                let diag = reference_diagnostics(&ts, y, &y_next, rank);
                (StepState::Dense(y_next), diag)
            }),
            (Method::Als, StepState::LowRank(s)) => {
                als_variational_step(&ts, s, opts).map(|(s, d)| (StepState::LowRank(s), d))
            }
            (Method::Splitting, StepState::LowRank(s)) => {
                splitting_euler_step(&ts, s, opts).map(|(s, d)| (StepState::LowRank(s), d))
            }
            _ => unreachable!("state representation follows the method"),
        };
        match outcome {
            Ok((state, diag)) => {
                traj.states.push(state);
                traj.diagnostics.push(diag);
                traj.times.push(t_next);
            }
            Err(Error::RankDeficient {
                context, value, floor, ..
            }) => {
                traj.halted = Some(HaltRecord {
                    step_index: i,
                    time: t_prev,
                    sigma_r,
                    sigma_1,
                    reason: format!("rank collapse in {context}: {value:e} below {floor:e}"),
                });
                break;
            }
            Err(e) => {
                return Err(Error::StepFailed {
                    step: i,
                    time: t_prev,
                    cause: Box::new(e),
                })
            }
        }
    }
    Ok(traj)
}

fn reference_diagnostics(ts: &TimeStep<'_>, prev: &DMatrix<f64>, next: &DMatrix<f64>, rank: usize) -> StepDiagnostics {
    let f_start = ts.objective(prev, prev);
    let f_end = ts.objective(prev, next);
    let s = linalg::singular_values(next);
    StepDiagnostics {
        sweeps_used: 1,
        galerkin_residual: ts.defect(prev, next).norm(),
        objective_value: f_end,
        objective_start: f_start,
        sigma_r: s[rank - 1],
        objective_decreased: super::not_increased(f_end, f_start),
        converged: true,
        flagged: false,
        half_sweep_objectives: vec![f_start, f_end],
    }
}
