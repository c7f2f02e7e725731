mod common;

use std::f64::consts::PI;

use common::*;
use lowrank_parabolic::analysis::sampling::{gaussian_matrix, random_model, random_source, random_state, trial_rng};
use lowrank_parabolic::analysis::{interpolant_gap, interpolant_gap_formula};
use lowrank_parabolic::galerkin::{Alpha, DiffusionModel, GalerkinOperator};
use lowrank_parabolic::manifold::tangent_project;
use lowrank_parabolic::stepper::{
    als_variational_step, integrate, reference_step, splitting_euler_step, Method, Problem, StepOptions, TimeStep,
};
use nalgebra::DMatrix;
use rand::Rng;

#[test]
fn gauss_legendre_integrates_polynomials_exactly() {
    let (x, w) = gauss_legendre(6);
    for k in 0..12 {
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
        assert!((q - 1.0 / (k + 1) as f64).abs() < 1e-15, "degree {k}");
    }
}

#[test]
fn basis_is_orthonormal_and_stiffness_diagonal() {
    let g = gram_1d(8);
    for i in 0..8 {
        for j in 0..8 {
            let id = if i == j { 1.0 } else { 0.0 };
            assert!((g.mass[(i, j)] - id).abs() < 1e-13);
            let k = if i == j { ((i + 1) as f64 * PI).powi(2) } else { 0.0 };
            assert!((g.stiff[(i, j)] - k).abs() < 1e-10 * (1.0 + k));
        }
    }
}

#[test]
fn bilinear_form_matches_quadrature() {
    let mut rng = trial_rng(21, 0);
    let op = GalerkinOperator::build(5).unwrap();
    for trial in 0..6 {
        let mut rng_t = trial_rng(21, trial);
        let model = random_model(&mut rng_t);
        let t = rng.random_range(0.0..1.0);
        let a = model.alpha(t);
        let y = gaussian_matrix(5, 5, &mut rng);
        let z = gaussian_matrix(5, 5, &mut rng);
        let expect = bilinear_by_quadrature(&a, &y, &z);
        let got = op.bilinear_a(&model, t, &y, &z);
        assert!(
            (got - expect).abs() < 1e-10 * expect.abs().max(1.0),
            "{got} vs {expect}"
        );
    }
}

#[test]
fn operator_matches_dense_assembly() {
    let n = 6;
    let op = GalerkinOperator::build(n).unwrap();
    let model = DiffusionModel::constant(Alpha::new(1.3, -0.4, 0.7)).unwrap();
    let dense = dense_stiffness(n, &model.alpha(0.0));
    let mut rng = trial_rng(4, 0);
    let y = gaussian_matrix(n, n, &mut rng);
    let got = vec(&op.apply_operator(&model, 0.0, &y));
    let expect = &dense * vec(&y);
    assert!((got - &expect).norm() < 1e-10 * expect.norm());
    let assembled = op.assemble_dense(&model, 0.0);
    assert!((assembled - &dense).norm() < 1e-10 * dense.norm());
}

#[test]
fn norms_match_quadrature() {
    let n = 5;
    let op = GalerkinOperator::build(n).unwrap();
    let mut rng = trial_rng(5, 0);
    let y = gaussian_matrix(n, n, &mut rng);
    let v_sq = bilinear_by_quadrature(&Alpha::identity(), &y, &y);
    assert!((op.v_norm(&y).powi(2) - v_sq).abs() < 1e-10 * v_sq);
    let mixed = mixed_seminorm_by_quadrature(&y);
    assert!((op.mixed_seminorm(&y) - mixed).abs() < 1e-10 * mixed);
}

#[test]
fn rotation_family_is_conjugated_diagonal() {
    let model = DiffusionModel::rotation(1.0, 0.1, 1.7).unwrap();
    for t in [0.0f64, 0.3, 1.1] {
        let (s, c) = (1.7 * t).sin_cos();
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.1]);
        let m = r.transpose() * d * r;
        let a = model.alpha(t);
        assert!((a.a11 - m[(0, 0)]).abs() < 1e-15);
        assert!((a.a12 - m[(0, 1)]).abs() < 1e-15);
        assert!((a.a22 - m[(1, 1)]).abs() < 1e-15);
    }
}

#[test]
fn source_mean_matches_time_quadrature() {
    let mut rng = trial_rng(8, 0);
    let source = random_source(4, &mut rng);
    let exact = source.rhs_mean(0.2, 0.35);
    let quad = source_mean_by_quadrature(&source, 0.2, 0.35);
    assert!((exact - &quad).norm() < 1e-13 * (1.0 + quad.norm()));
}

#[test]
fn reference_step_matches_dense_solve() {
    for trial in 0..10 {
        let mut rng = trial_rng(31, trial);
        let n = rng.random_range(2..=8);
        let model = random_model(&mut rng);
        let source = random_source(n, &mut rng);
        let h = 10f64.powf(rng.random_range(-3.0..-1.0));
        let t_next = rng.random_range(h..1.0);
        let op = GalerkinOperator::build(n).unwrap();
        let u = gaussian_matrix(n, n, &mut rng);
        let f = source_mean_by_quadrature(&source, t_next - h, t_next);
        let expect = dense_backward_euler(&dense_stiffness(n, &model.alpha(t_next)), h, &u, &f);
        let f_mean = source.rhs_mean(t_next - h, t_next);
        let ts = TimeStep {
            op: &op,
            model: &model,
            h,
            t_next,
            f_mean: &f_mean,
        };
        for opts in [
            StepOptions::direct(),
            StepOptions {
                inner_solver: lowrank_parabolic::stepper::InnerSolver::ConjugateGradient,
                ..StepOptions::default()
            },
        ] {
            let got = reference_step(&ts, &u, &opts).unwrap();
            assert!((&got - &expect).norm() < 1e-10 * expect.norm(), "trial {trial}");
        }
    }
}

#[test]
fn tangent_projection_matches_dense_projector() {
    for trial in 0..5 {
        let mut rng = trial_rng(41, trial);
        let u = random_state(7, 1 + trial % 3, &mut rng);
        let z = gaussian_matrix(7, 7, &mut rng);
        let expect = dense_projector(&u) * vec(&z);
        let got = vec(&tangent_project(&u, &z));
        assert!((got - &expect).norm() < 1e-13 * z.norm());
    }
}

#[test]
fn exact_two_mode_solution_is_matched_by_all_methods() {
    // u0 = E11 + E22 under the heat equation; backward Euler damps mode (k, k)
    // by (1 + 2 k^2 pi^2 h)^-1 per step
    let n = 6;
    let problem = Problem::homogeneous(n, DiffusionModel::identity()).unwrap();
    let u0 = mode_state(n, &[0, 1], &[1.0, 1.0]);
    let (t_final, steps) = (0.05, 25);
    let h = t_final / steps as f64;
    for method in [Method::Reference, Method::Als, Method::Splitting] {
        let traj = integrate(&problem, method, &u0, t_final, steps, &StepOptions::default()).unwrap();
        let y = traj.final_state().to_dense();
        for k in 1..=2 {
            let expect = (1.0 + 2.0 * (k as f64 * PI).powi(2) * h).powi(-(steps as i32));
            assert!((y[(k - 1, k - 1)] - expect).abs() < 1e-12, "{method:?} mode {k}");
        }
        let exact = problem
            .op
            .exact_diagonal_solution(&problem.model, &u0, t_final)
            .unwrap()
            .to_dense();
        assert!((exact[(0, 0)] - (-2.0 * PI * PI * t_final).exp()).abs() < 1e-14);
    }
}

#[test]
fn interpolant_gap_matches_simpson() {
    let mut rng = trial_rng(51, 0);
    let model = random_model(&mut rng);
    let source = random_source(6, &mut rng);
    let problem = Problem::new(GalerkinOperator::build(6).unwrap(), model, source).unwrap();
    let u0 = random_state(6, 2, &mut rng);
    let traj = integrate(&problem, Method::Als, &u0, 0.2, 17, &StepOptions::default()).unwrap();
    let simpson = simpson_gap(&traj.times, &traj.dense_states());
    let gap = interpolant_gap(&traj);
    let formula = interpolant_gap_formula(&traj);
    assert!((gap - simpson).abs() < 1e-12 * simpson);
    assert!((formula - simpson).abs() < 1e-12 * simpson);
}

#[test]
fn manifold_steps_match_full_rank_step_at_full_rank() {
    let mut rng = trial_rng(61, 0);
    let n = 5;
    let model = DiffusionModel::rotation(1.0, 0.1, 1.0).unwrap();
    let source = random_source(n, &mut rng);
    let op = GalerkinOperator::build(n).unwrap();
    let u = random_state(n, n, &mut rng);
    let (h, t_next) = (0.01, 0.3);
    let f = source.rhs_mean(t_next - h, t_next);
    let ts = TimeStep {
        op: &op,
        model: &model,
        h,
        t_next,
        f_mean: &f,
    };
    let expect = reference_step(&ts, &u.to_dense(), &StepOptions::direct()).unwrap();
    let (als, _) = als_variational_step(&ts, &u, &StepOptions::direct()).unwrap();
    let (split, _) = splitting_euler_step(&ts, &u, &StepOptions::direct()).unwrap();
    assert!((als.to_dense() - &expect).norm() < 1e-10 * expect.norm());
    assert!((split.to_dense() - &expect).norm() < 1e-10 * expect.norm());
}
