//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status if
//! any criterion fails. Tolerances are pinned below.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use common::*;
use lowrank_parabolic::analysis::sampling::{gaussian_matrix, random_alpha, random_source, random_state, trial_rng};
use lowrank_parabolic::analysis::{
    curvature_suite, energy_audit, equivalence_test, interpolant_gap, interpolant_gap_formula,
    projection_regularity_suite, tangency_suite, PropertyReport,
};
use lowrank_parabolic::galerkin::{DiffusionModel, GalerkinOperator};
use lowrank_parabolic::runner::{execute, parse_config, run, Experiment, RunConfig};
use lowrank_parabolic::stepper::{
    als_variational_step, integrate, reference_step, Method, Problem, StepOptions, TimeStep, Trajectory,
};
use rand::Rng;

const SEED: u64 = 20240917;

const EQUIVALENCE_TOL: f64 = 1e-10;
const ORDER_TOL: f64 = 0.2;
const FINEST_ERROR_REL: f64 = 1e-3;
const CONVERGENCE_RUNTIME_S: f64 = 30.0;
const ENERGY_SLACK: f64 = 1e-7;
const INTERPOLANT_TOL: f64 = 1e-12;
const GEOMETRY_TRIALS: usize = 1000;
const TANGENCY_TRIALS: usize = 500;
const TANGENCY_TOL: f64 = 1e-10;
const REFERENCE_TOL: f64 = 1e-10;
const FULL_RANK_ALS_TOL: f64 = 1e-9;
const MONITOR_STEP_WINDOW: usize = 2;

struct Outcome {
    failures: usize,
}

impl Outcome {
    fn report(&mut self, id: usize, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("{} [{id}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn worst(rep: &PropertyReport, name: &str) -> f64 {
    rep.stat(name).map_or(f64::NAN, |s| s.worst_ratio)
}

fn main() {
    let start = Instant::now();
    let mut out = Outcome { failures: 0 };
    let mut trajectories: Vec<(String, Trajectory)> = Vec::new();

    equivalence(&mut out);
    exact_convergence(&mut out, &mut trajectories);
    energy(&mut out, &mut trajectories);
    geometry(&mut out);
    tangency(&mut out);
    reference_oracle(&mut out, &mut trajectories);
    monitor(&mut out, &mut trajectories);
    // criterion 4 covers every trajectory produced above
    interpolant(&mut out, &trajectories);
    determinism(&mut out);

    println!(
        "acceptance: {} of 9 criteria passed ({:.1} s)",
        9 - out.failures,
        start.elapsed().as_secs_f64()
    );
    if out.failures > 0 {
        std::process::exit(1);
    }
}

fn equivalence(out: &mut Outcome) {
    let rep = equivalence_test(50, SEED);
    let trials = rep.stat("als_vs_splitting").map_or(0, |s| s.trials);
    let gap = worst(&rep, "als_vs_splitting") * EQUIVALENCE_TOL;
    let core = worst(&rep, "core_update_forms") * EQUIVALENCE_TOL;
    let full = worst(&rep, "full_rank_reference") * EQUIVALENCE_TOL;
    out.report(
        1,
        "single-sweep ALS equals splitting Euler",
        rep.passed() && trials >= 50,
        format!(
            "{trials} configurations, worst relative gap {gap:.2e} (core update forms {core:.2e}, \
             full-rank reference {full:.2e}), tolerance {EQUIVALENCE_TOL:.0e}"
        ),
    );
}

fn exact_convergence(out: &mut Outcome, trajectories: &mut Vec<(String, Trajectory)>) {
    let n = 32;
    let t_final = 0.1;
    let problem = Problem::homogeneous(n, DiffusionModel::identity()).unwrap();
    let u0 = mode_state(n, &[0, 1], &[1.0, 1.0]);
    let u0_norm = u0.to_dense().norm();
    // heat semigroup on the two diagonal modes: exp(-2 k^2 pi^2 t)
    let decay = |k: f64| (-2.0 * k * k * PI * PI * t_final).exp();
    let started = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    let mut finest_be = 0.0;
    for method in [Method::Als, Method::Splitting] {
        let mut errors = Vec::new();
        for level in 0..5 {
            let steps = 10usize << level;
            let traj = integrate(&problem, method, &u0, t_final, steps, &StepOptions::default()).unwrap();
            let y = traj.final_state().to_dense();
            let mut exact = nalgebra::DMatrix::zeros(n, n);
            exact[(0, 0)] = decay(1.0);
            exact[(1, 1)] = decay(2.0);
            errors.push((y - exact).norm());
            if level == 4 {
                // error of the unconstrained backward-Euler scheme itself
                let h = t_final / steps as f64;
                let be = |k: f64| (1.0 + 2.0 * k * k * PI * PI * h).powi(-(steps as i32));
                finest_be = ((be(1.0) - decay(1.0)).powi(2) + (be(2.0) - decay(2.0)).powi(2)).sqrt();
                trajectories.push((format!("convergence {} h=T/{steps}", method.name()), traj));
            }
        }
        let order = (errors[3] / errors[4]).ln() / 2f64.ln();
        let rel = errors[4] / u0_norm;
        pass &= (order - 1.0).abs() <= ORDER_TOL && rel <= FINEST_ERROR_REL;
        details.push(format!(
            "{} order {order:.3}, finest error {rel:.3e} |u0|",
            method.name()
        ));
    }
    let runtime = started.elapsed().as_secs_f64();
    pass &= runtime < CONVERGENCE_RUNTIME_S;
    out.report(
        2,
        "exact-solution convergence",
        pass,
        format!(
            "{}; bounds |order - 1| <= {ORDER_TOL}, error <= {FINEST_ERROR_REL:.0e} |u0|; full-space backward \
             Euler error at the finest step {:.3e} |u0|; {runtime:.1} s",
            details.join("; "),
            finest_be / u0_norm
        ),
    );
}

fn energy(out: &mut Outcome, trajectories: &mut Vec<(String, Trajectory)>) {
    let n = 16;
    let problem = Problem::homogeneous(n, DiffusionModel::rotation(1.0, 0.1, 1.0).unwrap()).unwrap();
    let u0 = mode_state(n, &[0, 1, 2], &[1.0, 0.5, 0.25]);
    // the estimates concern the variational step, so only the ALS run is audited
    let method = Method::Als;
    let traj = integrate(&problem, method, &u0, 0.5, 200, &StepOptions::default()).unwrap();
    let audit = energy_audit(&traj, &problem).unwrap();
    let slack = (audit.energy_lhs - audit.energy_rhs).max(0.0);
    let pass = traj.completed()
        && audit.passed()
        && slack < ENERGY_SLACK
        && audit.residual_budget < ENERGY_SLACK
        && audit.objective_monotone
        && audit.h_norm_monotone == Some(true);
    let details = format!(
        "{}: lhs - rhs {:.3e}, residual budget {:.3e}, objective monotone {}, |u|_H nonincreasing {}, {} \
         violations",
        method.name(),
        audit.energy_lhs - audit.energy_rhs,
        audit.residual_budget,
        audit.objective_monotone,
        audit.h_norm_monotone == Some(true),
        audit.violations.len()
    );
    trajectories.push((format!("energy {}", method.name()), traj));
    out.report(
        3,
        "energy audit",
        pass,
        format!("{details}; slack bound {ENERGY_SLACK:.0e}"),
    );
}

fn interpolant(out: &mut Outcome, trajectories: &[(String, Trajectory)]) {
    let mut worst_rel: f64 = 0.0;
    for (_, traj) in trajectories {
        let gap = interpolant_gap(traj);
        let formula = interpolant_gap_formula(traj);
        let rel = if formula > 0.0 {
            (gap - formula).abs() / formula
        } else {
            gap.abs()
        };
        worst_rel = worst_rel.max(rel);
    }
    out.report(
        4,
        "interpolant identity",
        worst_rel <= INTERPOLANT_TOL,
        format!(
            "{} trajectories, worst relative deviation {worst_rel:.2e}, tolerance {INTERPOLANT_TOL:.0e}",
            trajectories.len()
        ),
    );
}

fn geometry(out: &mut Outcome) {
    let mut rep = PropertyReport::new(SEED);
    for r in 1..=4 {
        rep.merge(&curvature_suite(16, r, GEOMETRY_TRIALS, SEED));
        rep.merge(&projection_regularity_suite(16, r, GEOMETRY_TRIALS, SEED));
    }
    let ratios: Vec<String> = rep
        .stats
        .iter()
        .map(|s| format!("{} {:.3}", s.name, s.worst_ratio))
        .collect();
    out.report(
        5,
        "geometry suites",
        rep.passed(),
        format!(
            "N = 16, r = 1..4, {GEOMETRY_TRIALS} trials per property and rank, {} violations; worst ratios: {}",
            rep.total_violations(),
            ratios.join(", ")
        ),
    );
}

fn tangency(out: &mut Outcome) {
    let model = DiffusionModel::rotation(1.0, 0.1, 1.0).unwrap();
    let rep = tangency_suite(16, 3, TANGENCY_TRIALS, SEED, &model);
    let normal = rep.stat("a1_tangency").unwrap();
    out.report(
        6,
        "tangency of the divergence part",
        rep.passed() && normal.trials == TANGENCY_TRIALS,
        format!(
            "{} states, worst |(I - P_u) A1 u| / |A1 u| = {:.2e} (tolerance {TANGENCY_TOL:.0e}), worst cone \
             defect {:.2e}",
            normal.trials,
            normal.worst_observed,
            rep.stat("cone").unwrap().worst_observed
        ),
    );
}

fn reference_oracle(out: &mut Outcome, trajectories: &mut Vec<(String, Trajectory)>) {
    let mut worst_dense: f64 = 0.0;
    let mut worst_als: f64 = 0.0;
    for trial in 0..20 {
        let mut rng = trial_rng(SEED, trial);
        let n = rng.random_range(2..=8);
        let alpha = random_alpha(&mut rng);
        let model = if trial % 2 == 0 {
            DiffusionModel::constant(alpha).unwrap()
        } else {
            DiffusionModel::rotation(rng.random_range(0.1..2.0), rng.random_range(0.1..2.0), 1.0).unwrap()
        };
        let source = random_source(n, &mut rng);
        let h = 10f64.powf(rng.random_range(-3.0..-1.0));
        let t_next = rng.random_range(h..1.0);
        let op = GalerkinOperator::build(n).unwrap();
        let u = gaussian_matrix(n, n, &mut rng);
        let f_quad = source_mean_by_quadrature(&source, t_next - h, t_next);
        let expect = dense_backward_euler(&dense_stiffness(n, &model.alpha(t_next)), h, &u, &f_quad);
        let f_mean = source.rhs_mean(t_next - h, t_next);
        let ts = TimeStep {
            op: &op,
            model: &model,
            h,
            t_next,
            f_mean: &f_mean,
        };
        let got = reference_step(&ts, &u, &StepOptions::default()).unwrap();
        worst_dense = worst_dense.max((&got - &expect).norm() / expect.norm());

        // anisotropic ALS at full rank
        let u_state = random_state(n, n, &mut rng);
        let reference = reference_step(&ts, &u_state.to_dense(), &StepOptions::default()).unwrap();
        let (als, _) = als_variational_step(&ts, &u_state, &StepOptions::default()).unwrap();
        worst_als = worst_als.max((als.to_dense() - &reference).norm() / reference.norm());
    }
    // a short full-rank trajectory, kept for the interpolant check
    let problem = Problem::homogeneous(6, DiffusionModel::rotation(1.0, 0.1, 1.0).unwrap()).unwrap();
    let mut rng = trial_rng(SEED, 99);
    let u0 = random_state(6, 6, &mut rng);
    let traj = integrate(&problem, Method::Reference, &u0, 0.1, 20, &StepOptions::default()).unwrap();
    trajectories.push(("reference r=N".into(), traj));
    out.report(
        7,
        "reference solver oracles",
        worst_dense <= REFERENCE_TOL && worst_als <= FULL_RANK_ALS_TOL,
        format!(
            "20 instances with N <= 8: reference vs dense solve {worst_dense:.2e} (tolerance {REFERENCE_TOL:.0e}), \
             full-rank ALS vs reference {worst_als:.2e} (tolerance {FULL_RANK_ALS_TOL:.0e})"
        ),
    );
}

fn monitor(out: &mut Outcome, trajectories: &mut Vec<(String, Trajectory)>) {
    // modes (1,1) and (3,3) decay at 2 pi^2 and 18 pi^2
    let n = 8;
    let problem = Problem::homogeneous(n, DiffusionModel::identity()).unwrap();
    let u0 = mode_state(n, &[0, 2], &[1.0, 1.0]);
    let (t_final, steps) = (0.5, 500);
    let h = t_final / steps as f64;
    let floor = StepOptions::default().rank_floor_rel;
    let rho = (1.0 + 2.0 * PI * PI * h) / (1.0 + 18.0 * PI * PI * h);
    let predicted = (floor.ln() / rho.ln()).ceil() as usize;
    let continuous = -floor.ln() / (16.0 * PI * PI);
    let mut pass = true;
    let mut details = Vec::new();
    for method in [Method::Als, Method::Splitting] {
        let traj = integrate(&problem, method, &u0, t_final, steps, &StepOptions::default()).unwrap();
        match &traj.halted {
            Some(halt) => {
                let off = halt.step_index.abs_diff(predicted);
                pass &= off <= MONITOR_STEP_WINDOW;
                details.push(format!(
                    "{} halted at step {} (t = {:.4}, sigma_r/sigma_1 = {:.2e})",
                    method.name(),
                    halt.step_index,
                    halt.time,
                    halt.sigma_r / halt.sigma_1
                ));
            }
            None => {
                pass = false;
                details.push(format!("{} did not halt", method.name()));
            }
        }
        trajectories.push((format!("monitor {}", method.name()), traj));
    }
    out.report(
        8,
        "maximal-time monitor",
        pass,
        format!(
            "{}; predicted crossing of the floor {floor:.0e} at step {predicted} of the backward-Euler decay ratio \
             (continuous-time crossing t = {continuous:.4}); window {MONITOR_STEP_WINDOW} steps",
            details.join("; ")
        ),
    );
}

fn determinism(out: &mut Outcome) {
    let mut pass = true;
    let mut runs = 0;
    for exp in [
        Experiment::HeatDiagonal,
        Experiment::Anisotropic,
        Experiment::ConvergenceH,
        Experiment::Equivalence,
        Experiment::GeometrySuites,
    ] {
        let text = format!("experiment = {}\nseed = 77\ntrials = 100\n", exp.name());
        let cfg: RunConfig = parse_config(&text).unwrap();
        let a = execute(&cfg);
        let b = execute(&cfg);
        pass &= a.files == b.files;
        runs += 1;
    }
    // through the file system
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut contents = Vec::new();
    for d in &dirs {
        let mut cfg = parse_config("experiment = equivalence\nseed = 5\n").unwrap();
        cfg.output_dir = d.path().join("out");
        let (status, _) = run(&cfg);
        pass &= status.code() == 0;
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&cfg.output_dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        contents.push(files);
    }
    pass &= contents[0] == contents[1] && !contents[0].is_empty();
    out.report(
        9,
        "determinism",
        pass,
        format!("{runs} experiments executed twice in memory and one written twice to disk, byte-identical outputs"),
    );
}
