//! Batch experiment execution behind the command-line front end.
//!
//! A run parses a [`RunConfig`], computes everything in memory, and only then
//! writes its artifacts, so a failed parse leaves no files behind. Outputs
//! are plain functions of `(config, seed)`: no timestamps, no thread-order
//! dependence, floats printed with 17 significant digits.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

pub use config::{parse_config, AlphaSpec, Experiment, InitialSpec, ParseError, RunConfig, SourceTermSpec};

use crate::analysis::{
    convergence_study, curvature_suite, energy_audit, equivalence_test, interpolant_gap, interpolant_gap_formula,
    projection_regularity_suite, sampling, tangency_suite, ConvergenceAxis, ConvergenceTable, PropertyReport,
    StudySetup,
};
use crate::error::Result;
use crate::galerkin::{GalerkinOperator, SourceSpec, SourceTerm};
use crate::manifold::LowRankState;
use crate::stepper::{integrate, Problem, StepOptions, Trajectory};

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Passed,
    Violation,
    ParseError,
    /// Numerical failure, or an output directory that cannot be written.
    Failure,
}

impl RunStatus {
    pub fn code(&self) -> i32 {
        match self {
            RunStatus::Passed => 0,
            RunStatus::Violation => 1,
            RunStatus::ParseError => 2,
            RunStatus::Failure => 3,
        }
    }
}

/// Relative tolerance of the interpolant identity.
pub const INTERPOLANT_TOL: f64 = 1e-12;
/// Allowed deviation of the observed order from 1 on the exact-solution study.
pub const ORDER_BAND: f64 = 0.2;

/// One asserted property: `violations` out of `trials` samples, with the
/// worst sample value and the bound it is compared with. Rows from
/// randomized suites report ratios, so their bound is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    pub worst: f64,
    pub bound: f64,
}

impl Check {
    fn single(name: &str, worst: f64, bound: f64, ok: bool) -> Self {
        Self {
            name: name.into(),
            trials: 1,
            violations: usize::from(!ok),
            worst,
            bound,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Result of [`execute`]: the artifacts, not yet written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub status: RunStatus,
    pub checks: Vec<Check>,
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
}

/// Parses `text`, applies CLI overrides, executes and writes the artifacts
/// into the output directory. Returns the status and the log lines.
pub fn run_text(text: &str, seed: Option<u64>, out: Option<&Path>) -> (RunStatus, String) {
    let mut cfg = match parse_config(text) {
        Ok(c) => c,
        Err(e) => return (RunStatus::ParseError, format!("config error: {e}\n")),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(dir) = out {
        cfg.output_dir = dir.to_path_buf();
    }
    run(&cfg)
}

/// Executes `cfg` and writes its artifacts. Returns the status and the log.
pub fn run(cfg: &RunConfig) -> (RunStatus, String) {
    let output = execute(cfg);
    let log = output
        .files
        .iter()
        .find(|(name, _)| name == "run.log")
        .map(|(_, text)| text.clone())
        .unwrap_or_default();
    if let Err(e) = write_files(&cfg.output_dir, &output.files) {
        let msg = format!("{log}cannot write output to {}: {e}\n", cfg.output_dir.display());
        return (RunStatus::Failure, msg);
    }
    (output.status, log)
}

fn write_files(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, text) in files {
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}

/// Runs the experiment in memory. A numerical failure yields only `run.log`.
pub fn execute(cfg: &RunConfig) -> RunOutput {
    let mut log = String::new();
    let _ = writeln!(log, "experiment {} (seed {})", cfg.experiment.name(), cfg.seed);
    // the output directory is left out so that logs do not depend on it
    for line in cfg
        .serialize()
        .lines()
        .filter(|l| !l.is_empty() && !l.starts_with("output_dir"))
    {
        let _ = writeln!(log, "  {line}");
    }
    match run_experiment(cfg, &mut log) {
        Ok(mut art) => {
            let status = if art.checks.iter().all(Check::passed) {
                RunStatus::Passed
            } else {
                RunStatus::Violation
            };
            for c in &art.checks {
                let _ = writeln!(
                    log,
                    "check {}: {} ({} of {} violated, worst {:.6e}, bound {:.6e})",
                    c.name,
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.violations,
                    c.trials,
                    c.worst,
                    c.bound
                );
            }
            let _ = writeln!(log, "status {}", status.code());
            let mut files = vec![
                ("trajectory.csv".to_string(), art.trajectory),
                ("diagnostics.csv".to_string(), art.diagnostics),
                ("report.csv".to_string(), report_table(&art.checks)),
            ];
            files.append(&mut art.extra);
            if cfg.plot {
                files.push(("plot.gp".to_string(), plot_script()));
            }
            files.push(("run.log".to_string(), log));
            RunOutput {
                status,
                checks: art.checks,
                files,
            }
        }
        Err(e) => {
            let _ = writeln!(log, "numerical failure: {e}");
            let _ = writeln!(log, "status {}", RunStatus::Failure.code());
            RunOutput {
                status: RunStatus::Failure,
                checks: Vec::new(),
                files: vec![("run.log".to_string(), log)],
            }
        }
    }
}

struct Artifacts {
    trajectory: String,
    diagnostics: String,
    checks: Vec<Check>,
    extra: Vec<(String, String)>,
}

const TRAJECTORY_HEADER: &str = "step,t,h_norm,v_norm,sigma_r,galerkin_residual,objective\n";
const DIAGNOSTICS_HEADER: &str =
    "step,t,sweeps_used,converged,flagged,objective_start,objective,objective_decreased,galerkin_residual,sigma_r\n";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn problem_of(cfg: &RunConfig) -> Result<Problem> {
    let model = cfg.alpha.model()?;
    let n = cfg.n;
    let unit = |k: usize| DVector::from_fn(n, |i, _| if i + 1 == k { 1.0 } else { 0.0 });
    let terms = cfg
        .source
        .iter()
        .map(|t| SourceTerm {
            profile: t.profile,
            p: unit(t.p),
            q: unit(t.q),
        })
        .collect();
    Problem::new(GalerkinOperator::build(n)?, model, SourceSpec::new(n, terms)?)
}

fn initial_matrix(cfg: &RunConfig) -> DMatrix<f64> {
    match cfg.initial {
        InitialSpec::Modes => DMatrix::from_fn(cfg.n, cfg.n, |i, j| if i == j && i < cfg.r { 1.0 } else { 0.0 }),
        InitialSpec::Random => {
            let mut rng = sampling::trial_rng(cfg.seed, 0);
            sampling::random_state(cfg.n, cfg.r, &mut rng).to_dense()
        }
    }
}

fn initial_state(cfg: &RunConfig) -> Result<LowRankState> {
    crate::analysis::initial_state(&initial_matrix(cfg), cfg.r)
}

fn options(cfg: &RunConfig) -> StepOptions {
    StepOptions {
        rank_floor_rel: cfg.rank_floor,
        inner_solver: cfg.solver,
        cg_max_iter: cfg.cg_max_iter,
        ..StepOptions::default()
    }
}

fn run_experiment(cfg: &RunConfig, log: &mut String) -> Result<Artifacts> {
    match cfg.experiment {
        Experiment::HeatDiagonal | Experiment::Anisotropic | Experiment::EnergyAudit => trajectory_experiment(cfg, log),
        Experiment::ConvergenceH => convergence_experiment(cfg, ConvergenceAxis::Step, log),
        Experiment::ConvergenceRank => convergence_experiment(cfg, ConvergenceAxis::Rank, log),
        Experiment::Equivalence => {
            let rep = equivalence_test(cfg.trials, cfg.seed);
            let _ = writeln!(log, "equivalence: {} randomized configurations", cfg.trials);
            Ok(suite_artifacts(&rep))
        }
        Experiment::GeometrySuites => {
            let model = cfg.alpha.model()?;
            let mut rep = PropertyReport::new(cfg.seed);
            for r in 1..=cfg.r {
                for sub in [
                    curvature_suite(cfg.n, r, cfg.trials, cfg.seed),
                    projection_regularity_suite(cfg.n, r, cfg.trials, cfg.seed),
                    tangency_suite(cfg.n, r, cfg.trials, cfg.seed, &model),
                ] {
                    rep.merge(&rename(&sub, r));
                }
            }
            let _ = writeln!(
                log,
                "geometry suites: N = {}, ranks 1..={}, {} trials each",
                cfg.n, cfg.r, cfg.trials
            );
            Ok(suite_artifacts(&rep))
        }
    }
}

fn rename(rep: &PropertyReport, r: usize) -> PropertyReport {
    let mut out = rep.clone();
    for s in &mut out.stats {
        s.name = format!("{}_r{r}", s.name);
    }
    out
}

fn suite_artifacts(rep: &PropertyReport) -> Artifacts {
    let checks = rep
        .stats
        .iter()
        .map(|s| Check {
            name: s.name.clone(),
            trials: s.trials,
            violations: s.violations,
            worst: s.worst_ratio,
            bound: 1.0,
        })
        .collect();
    Artifacts {
        trajectory: TRAJECTORY_HEADER.into(),
        diagnostics: DIAGNOSTICS_HEADER.into(),
        checks,
        extra: Vec::new(),
    }
}

fn trajectory_tables(traj: &Trajectory, problem: &Problem) -> (String, String) {
    let mut t_out = String::from(TRAJECTORY_HEADER);
    let mut d_out = String::from(DIAGNOSTICS_HEADER);
    for (i, state) in traj.states.iter().enumerate() {
        let y = state.to_dense();
        let (_, sigma_r) = state.extreme_singular(traj.rank);
        let (res, obj) = match i {
            0 => (String::new(), String::new()),
            _ => {
                let d = &traj.diagnostics[i - 1];
                (num(d.galerkin_residual), num(d.objective_value))
            }
        };
        let _ = writeln!(
            t_out,
            "{i},{},{},{},{},{res},{obj}",
            num(traj.times[i]),
            num(y.norm()),
            num(problem.op.v_norm(&y)),
            num(sigma_r)
        );
    }
    for (i, d) in traj.diagnostics.iter().enumerate() {
        let _ = writeln!(
            d_out,
            "{},{},{},{},{},{},{},{},{},{}",
            i + 1,
            num(traj.times[i + 1]),
            d.sweeps_used,
            d.converged,
            d.flagged,
            num(d.objective_start),
            num(d.objective_value),
            d.objective_decreased,
            num(d.galerkin_residual),
            num(d.sigma_r)
        );
    }
    (t_out, d_out)
}

fn trajectory_checks(traj: &Trajectory, problem: &Problem, t_final: f64, log: &mut String) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let steps = traj.diagnostics.len();
    checks.push(Check::single(
        "reached_final_time",
        traj.final_time(),
        t_final,
        traj.completed(),
    ));
    if let Some(h) = &traj.halted {
        let _ = writeln!(
            log,
            "halted before step {} at t = {}: {}",
            h.step_index, h.time, h.reason
        );
    }
    let flagged = traj.diagnostics.iter().filter(|d| d.flagged).count();
    checks.push(Check {
        name: "unconverged_steps_flagged".into(),
        trials: steps,
        violations: flagged,
        worst: flagged as f64,
        bound: 0.0,
    });

    let gap = interpolant_gap(traj);
    let formula = interpolant_gap_formula(traj);
    let rel = if formula > 0.0 {
        (gap - formula).abs() / formula
    } else {
        gap.abs()
    };
    checks.push(Check::single(
        "interpolant_identity",
        rel,
        INTERPOLANT_TOL,
        rel <= INTERPOLANT_TOL,
    ));
    if steps == 0 {
        return Ok(checks);
    }

    let audit = energy_audit(traj, problem)?;
    let count = |names: &[&str]| audit.violations.iter().filter(|v| names.contains(&v.audit)).count();
    let _ = writeln!(
        log,
        "energy: lhs {:.16e} rhs {:.16e} residual budget {:.16e}",
        audit.energy_lhs, audit.energy_rhs, audit.residual_budget
    );
    checks.push(Check {
        name: "energy_inequality".into(),
        trials: steps + 1,
        violations: count(&["energy_step", "energy_sum"]),
        worst: audit.energy_lhs - audit.energy_rhs,
        bound: audit.residual_budget,
    });
    let objective_rise = audit.steps[1..]
        .iter()
        .map(|s| s.objective - s.objective_start)
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check {
        name: "objective_monotone".into(),
        trials: steps,
        violations: count(&["objective_monotone"]),
        worst: objective_rise,
        bound: 0.0,
    });
    checks.push(Check {
        name: "difference_quotient_telescope".into(),
        trials: steps,
        violations: count(&["telescope"]),
        worst: audit.telescope_worst_excess,
        bound: 0.0,
    });
    checks.push(Check {
        name: "v_norm_boundedness".into(),
        trials: steps,
        violations: count(&["boundedness"]),
        worst: audit.boundedness_worst_excess,
        bound: 0.0,
    });
    if audit.h_norm_monotone.is_some() {
        let rise = audit
            .steps
            .windows(2)
            .map(|w| w[1].h_norm_sq.sqrt() - w[0].h_norm_sq.sqrt())
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check {
            name: "h_norm_nonincreasing".into(),
            trials: steps,
            violations: count(&["h_norm_monotone"]),
            worst: rise,
            bound: 0.0,
        });
    }
    Ok(checks)
}

fn trajectory_experiment(cfg: &RunConfig, log: &mut String) -> Result<Artifacts> {
    let problem = problem_of(cfg)?;
    let u0 = initial_state(cfg)?;
    let traj = integrate(&problem, cfg.method, &u0, cfg.t_final, cfg.n_steps, &options(cfg))?;
    let _ = writeln!(
        log,
        "{}: {} of {} steps, h = {:.16e}, final |u|_H = {:.16e}",
        cfg.method.name(),
        traj.diagnostics.len(),
        cfg.n_steps,
        traj.h,
        traj.final_state().to_dense().norm()
    );
    let mut checks = trajectory_checks(&traj, &problem, cfg.t_final, log)?;
    if cfg.experiment == Experiment::HeatDiagonal {
        if problem.model.is_constant_diagonal() && problem.source.is_zero() && traj.completed() {
            let exact = problem
                .op
                .exact_diagonal_solution(&problem.model, &u0, cfg.t_final)?
                .to_dense();
            let error = (traj.final_state().to_dense() - exact).norm();
            let _ = writeln!(log, "final error against the exact solution {error:.16e}");
            checks.push(Check::single(
                "final_error_exact",
                error,
                cfg.error_tol,
                error <= cfg.error_tol,
            ));
        } else {
            let _ = writeln!(log, "no exact solution for this configuration; final error not checked");
        }
    }
    let (trajectory, diagnostics) = trajectory_tables(&traj, &problem);
    Ok(Artifacts {
        trajectory,
        diagnostics,
        checks,
        extra: Vec::new(),
    })
}

fn convergence_table(table: &ConvergenceTable) -> String {
    let mut out = String::from("n_steps,h,rank,error,order,halted\n");
    for row in &table.rows {
        let order = row.order.map(num).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{order},{}",
            row.n_steps,
            num(row.h),
            row.rank,
            num(row.error),
            row.halted
        );
    }
    out
}

fn convergence_experiment(cfg: &RunConfig, axis: ConvergenceAxis, log: &mut String) -> Result<Artifacts> {
    let problem = problem_of(cfg)?;
    let setup = StudySetup {
        problem: problem.clone(),
        initial: initial_matrix(cfg),
        t_final: cfg.t_final,
        method: cfg.method,
        rank: cfg.r,
        base_steps: cfg.n_steps,
        levels: cfg.levels,
        ranks: (1..=cfg.r).collect(),
        opts: options(cfg),
    };
    let table = convergence_study(axis, &setup)?;
    let _ = writeln!(log, "convergence oracle: {}", table.oracle);
    for row in &table.rows {
        let _ = writeln!(
            log,
            "  steps {} rank {} error {:.16e} order {}",
            row.n_steps,
            row.rank,
            row.error,
            row.order.map_or("-".to_string(), |o| format!("{o:.6}"))
        );
    }

    // tables of the finest run on the axis
    let (steps, rank) = match axis {
        ConvergenceAxis::Step => (cfg.n_steps << (cfg.levels - 1), cfg.r),
        ConvergenceAxis::Rank => (cfg.n_steps, cfg.r),
    };
    let u0 = crate::analysis::initial_state(&setup.initial, rank)?;
    let traj = integrate(&problem, cfg.method, &u0, cfg.t_final, steps, &setup.opts)?;
    let (trajectory, diagnostics) = trajectory_tables(&traj, &problem);

    let mut checks = Vec::new();
    if axis == ConvergenceAxis::Step && table.oracle == "exact" {
        match table.finest_order() {
            Some(order) => {
                let dev = (order - 1.0).abs();
                checks.push(Check::single("observed_order", dev, ORDER_BAND, dev <= ORDER_BAND));
            }
            None => {
                let _ = writeln!(log, "fewer than two levels; order not checked");
            }
        }
    }
    let halted = table.rows.iter().filter(|r| r.halted).count();
    if halted > 0 {
        let _ = writeln!(log, "{halted} run(s) halted by the rank monitor");
    }
    Ok(Artifacts {
        trajectory,
        diagnostics,
        checks,
        extra: vec![("convergence.csv".to_string(), convergence_table(&table))],
    })
}

fn report_table(checks: &[Check]) -> String {
    let mut out = String::from("check,trials,violations,worst,bound,status\n");
    for c in checks {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.name,
            c.trials,
            c.violations,
            num(c.worst),
            num(c.bound),
            if c.passed() { "pass" } else { "fail" }
        );
    }
    out
}

fn plot_script() -> String {
    "set datafile separator ','\n\
     set key autotitle columnhead\n\
     set logscale y\n\
     set xlabel 't'\n\
     plot 'trajectory.csv' using 2:3 with lines title 'h_norm', \\\n\
     \x20    'trajectory.csv' using 2:5 with lines title 'sigma_r'\n"
        .to_string()
}
