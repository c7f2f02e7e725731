use rand::Rng;

use super::sampling::{random_model, random_source, random_state, trial_rng};
use super::PropertyReport;
use crate::galerkin::GalerkinOperator;
use crate::stepper::{
    als_variational_step, reference_step, splitting_euler_step_with, CoreUpdate, StepOptions, TimeStep,
};

/// Pass threshold for the relative gaps.
pub const EQUIVALENCE_TOL: f64 = 1e-10;

/// Compares one ALS sweep with one projector-splitting Euler step on random
/// configurations (`N <= 16`, `r <= 4`, `h` log-uniform in `[1e-4, 1e-1]`,
/// random admissible coefficient and source), all with direct inner solves.
///
/// Properties, as relative Frobenius gaps:
///
/// * `als_vs_splitting`: single-sweep ALS against the splitting step;
/// * `core_update_forms`: projected against forward-Euler core update;
/// * `full_rank_reference` (every fourth trial, run with `r = N`): the
///   splitting step against the full-space backward-Euler step.
pub fn equivalence_test(trials: usize, seed: u64) -> PropertyReport {
    let mut report = PropertyReport::new(seed);
    let als_opts = StepOptions {
        single_sweep_mode: true,
        ..StepOptions::direct()
    };
    let direct = StepOptions::direct();
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let n = rng.random_range(2..=16);
        let full_rank = trial % 4 == 3;
        let r = if full_rank {
            n.min(4)
        } else {
            rng.random_range(1..=n.min(4))
        };
        let n = if full_rank { r } else { n };
        let h = 10f64.powf(rng.random_range(-4.0..-1.0));
        let t_next = rng.random_range(h..1.0);
        let model = random_model(&mut rng);
        let source = random_source(n, &mut rng);
        let u0 = random_state(n, r, &mut rng);
        let op = GalerkinOperator::build(n).expect("positive size");
        let f = source.rhs_mean(t_next - h, t_next);
        let ts = TimeStep {
            op: &op,
            model: &model,
            h,
            t_next,
            f_mean: &f,
        };

        let (als, _) = match als_variational_step(&ts, &u0, &als_opts) {
            Ok(out) => out,
            Err(_) => {
                report.record("als_vs_splitting", trial, f64::INFINITY, EQUIVALENCE_TOL, 0.0);
                continue;
            }
        };
        let split = splitting_euler_step_with(&ts, &u0, &direct, CoreUpdate::Projection);
        let explicit = splitting_euler_step_with(&ts, &u0, &direct, CoreUpdate::ForwardEuler);
        let (split, explicit) = match (split, explicit) {
            (Ok((a, _)), Ok((b, _))) => (a.to_dense(), b.to_dense()),
            _ => {
                report.record("als_vs_splitting", trial, f64::INFINITY, EQUIVALENCE_TOL, 0.0);
                continue;
            }
        };
        let scale = split.norm();
        report.record(
            "als_vs_splitting",
            trial,
            (als.to_dense() - &split).norm() / scale,
            EQUIVALENCE_TOL,
            0.0,
        );
        report.record(
            "core_update_forms",
            trial,
            (&explicit - &split).norm() / scale,
            EQUIVALENCE_TOL,
            0.0,
        );
        if full_rank {
            match reference_step(&ts, &u0.to_dense(), &direct) {
                Ok(y) => report.record(
                    "full_rank_reference",
                    trial,
                    (y - &split).norm() / scale,
                    EQUIVALENCE_TOL,
                    0.0,
                ),
                Err(_) => report.record("full_rank_reference", trial, f64::INFINITY, EQUIVALENCE_TOL, 0.0),
            }
        }
    }
    report
}
