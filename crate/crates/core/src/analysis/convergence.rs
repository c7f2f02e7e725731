use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::manifold::{factorize_with_floor, LowRankState};
use crate::stepper::{integrate, Method, Problem, StepOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceAxis {
    /// Halve the step size `levels` times starting from `base_steps`.
    Step,
    /// Sweep the rank over `ranks` at `base_steps`.
    Rank,
}

/// Everything a study needs besides the axis.
#[derive(Debug, Clone)]
pub struct StudySetup {
    pub problem: Problem,
    /// Initial condition in coefficient form; it is truncated (or padded) to
    /// each rank in use.
    pub initial: DMatrix<f64>,
    pub t_final: f64,
    pub method: Method,
    pub rank: usize,
    pub base_steps: usize,
    pub levels: usize,
    pub ranks: Vec<usize>,
    pub opts: StepOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n_steps: usize,
    pub h: f64,
    pub rank: usize,
    /// `|u_h(T) - u(T)|_H` against the oracle.
    pub error: f64,
    /// Observed order with respect to the previous row (`h` or `r`).
    pub order: Option<f64>,
    pub halted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub axis: ConvergenceAxis,
    pub method: Method,
    /// Exact semidiscrete solution or a full-rank reference run.
    pub oracle: &'static str,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Order between the last two rows.
    pub fn finest_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order)
    }
}

/// Relative size of the padding used to lift an initial condition of rank
/// below `r` onto the rank-`r` manifold.
const RANK_PADDING_REL: f64 = 1e-10;

/// Rank-`r` initial state from `y`: truncated SVD, with missing singular
/// values replaced by `RANK_PADDING_REL * sigma_1` along orthogonal
/// directions when `y` has lower rank.
pub fn initial_state(y: &DMatrix<f64>, r: usize) -> Result<LowRankState> {
    let (u, s, v) = crate::linalg::svd_sorted(y);
    if !(s[0] > 0.0) {
        return Err(Error::InvalidArgument("initial condition is zero".into()));
    }
    let floor = RANK_PADDING_REL * s[0];
    if s[r - 1] > floor {
        return factorize_with_floor(y, r, 0.0);
    }
    let core = DMatrix::from_fn(r, r, |i, j| if i == j { s[i].max(floor) } else { 0.0 });
    LowRankState::new(u.columns(0, r).into_owned(), core, v.columns(0, r).into_owned())
}

/// Runs the method along the chosen axis and compares final states with an
/// oracle: the exact semidiscrete solution when the coefficient is constant
/// and diagonal and the source vanishes, otherwise a full-rank reference run
/// (with 4x the finest step count on the step axis, the same step count on
/// the rank axis). Orders are `log(e_prev / e) / log(p_prev / p)` with
/// `p = h` or `p = 1 / r`.
pub fn convergence_study(axis: ConvergenceAxis, setup: &StudySetup) -> Result<ConvergenceTable> {
    let n = setup.problem.op.basis_dim();
    if setup.initial.shape() != (n, n) {
        return Err(Error::Shape("initial condition does not match the basis".into()));
    }
    let analytic = setup.problem.model.is_constant_diagonal() && setup.problem.source.is_zero();
    let oracle_name = if analytic { "exact" } else { "reference" };
    let plan: Vec<(usize, usize)> = match axis {
        ConvergenceAxis::Step => (0..setup.levels.max(1))
            .map(|k| (setup.base_steps << k, setup.rank))
            .collect(),
        ConvergenceAxis::Rank => setup.ranks.iter().map(|&r| (setup.base_steps, r)).collect(),
    };
    if setup.t_final == 0.0 {
        let rows = plan
            .iter()
            .map(|&(steps, rank)| ConvergenceRow {
                n_steps: steps,
                h: 0.0,
                rank,
                error: 0.0,
                order: None,
                halted: false,
            })
            .collect();
        return Ok(ConvergenceTable {
            axis,
            method: setup.method,
            oracle: oracle_name,
            rows,
        });
    }

    let oracle = if analytic {
        let s = crate::linalg::singular_values(&setup.initial);
        let exact_rank = s.iter().filter(|&&x| x > RANK_PADDING_REL * s[0]).count().max(1);
        let u0 = factorize_with_floor(&setup.initial, exact_rank, 0.0)?;
        setup
            .problem
            .op
            .exact_diagonal_solution(&setup.problem.model, &u0, setup.t_final)?
            .to_dense()
    } else {
        let steps = match axis {
            ConvergenceAxis::Step => 4 * plan.last().expect("nonempty plan").0,
            ConvergenceAxis::Rank => setup.base_steps,
        };
        let full = initial_state(&setup.initial, n)?;
        integrate(
            &setup.problem,
            Method::Reference,
            &full,
            setup.t_final,
            steps,
            &setup.opts,
        )?
        .final_state()
        .to_dense()
    };

    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &(steps, rank) in &plan {
        let u0 = initial_state(&setup.initial, rank)?;
        let traj = integrate(&setup.problem, setup.method, &u0, setup.t_final, steps, &setup.opts)?;
        let error = (traj.final_state().to_dense() - &oracle).norm();
        let h = setup.t_final / steps as f64;
        let order = rows.last().and_then(|prev| {
            let ratio = match axis {
                ConvergenceAxis::Step => prev.h / h,
                ConvergenceAxis::Rank => rank as f64 / prev.rank as f64,
            };
            (prev.error > 0.0 && error > 0.0 && ratio != 1.0).then(|| (prev.error / error).ln() / ratio.ln())
        });
        rows.push(ConvergenceRow {
            n_steps: steps,
            h,
            rank,
            error,
            order,
            halted: !traj.completed(),
        });
    }
    Ok(ConvergenceTable {
        axis,
        method: setup.method,
        oracle: oracle_name,
        rows,
    })
}
