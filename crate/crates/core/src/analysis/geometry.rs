use rand::Rng;

use super::sampling::{gaussian_matrix, random_state, trial_rng};
use super::PropertyReport;
use crate::galerkin::{DiffusionModel, GalerkinOperator};
use crate::linalg;
use crate::manifold::{factorize_with_floor, tangent_project, LowRankState};

/// Round-off allowance relative to the scale of the compared quantities.
const ROUND_OFF: f64 = 1e-13;

/// Curvature bounds of the fixed-rank manifold on random pairs `(u, v)` and
/// random directions `Z`:
///
/// * `curvature_spectral`: `|(P_u - P_v) Z| <= 2/sigma_r(u) |u - v|_2 |Z|`
/// * `curvature_frobenius`: the same with `|u - v|_F`
/// * `curvature_normal`: `|(I - P_v)(u - v)| <= |u - v|_F^2 / sigma_r(u)`
///
/// Even trials use independent pairs; odd trials use a nearby `v`, the rank-`r`
/// truncation of `u + delta W` with `delta` log-uniform in `[1e-6, 1] sigma_r(u)`.
pub fn curvature_suite(n: usize, r: usize, trials: usize, seed: u64) -> PropertyReport {
    let mut report = PropertyReport::new(seed);
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let u = random_state(n, r, &mut rng);
        let ud = u.to_dense();
        let v = if trial % 2 == 0 {
            random_state(n, r, &mut rng)
        } else {
            let delta = u.smallest_singular() * 10f64.powf(-6.0 * rng.random::<f64>());
            let w = gaussian_matrix(n, n, &mut rng);
            let w = &w / w.norm();
            match factorize_with_floor(&(&ud + w * delta), r, 0.0) {
                Ok(v) => v,
                Err(_) => random_state(n, r, &mut rng),
            }
        };
        let vd = v.to_dense();
        let z = gaussian_matrix(n, n, &mut rng);
        let diff = &ud - &vd;
        let sigma = u.smallest_singular();

        let lhs = (tangent_project(&u, &z) - tangent_project(&v, &z)).norm();
        let zn = z.norm();
        let allowance = ROUND_OFF * zn;
        report.record(
            "curvature_spectral",
            trial,
            lhs,
            2.0 / sigma * linalg::spectral_norm(&diff) * zn,
            allowance,
        );
        report.record(
            "curvature_frobenius",
            trial,
            lhs,
            2.0 / sigma * diff.norm() * zn,
            allowance,
        );

        let normal = (&diff - tangent_project(&v, &diff)).norm();
        let scale = ud.norm() + vd.norm();
        report.record(
            "curvature_normal",
            trial,
            normal,
            diff.norm_squared() / sigma,
            ROUND_OFF * scale,
        );
    }
    report
}

/// Regularity bounds of rank-`r` states in the sine basis:
///
/// * `v_projection`: `|P_u Z|_V <= (1 + r |u|_V^2 / sigma_r^2)^{1/2} |Z|_V`
/// * `factor_regularity`: `|u^i_k|_{H^1_0} <= |u|_V / sigma_k` for both factors
/// * `mixed_seminorm`: `|d1 d2 u| <= (r / sigma_r) |u|_V^2`
/// * `a2_bound`: `|A_2(t) u|_H <= (2 r |a12(t)| / sigma_r) |u|_V^2`
///
/// The coefficient of `A_2` is a random rotation family evaluated at a
/// random time.
pub fn projection_regularity_suite(n: usize, r: usize, trials: usize, seed: u64) -> PropertyReport {
    let op = GalerkinOperator::build(n).expect("basis size is positive");
    let mut report = PropertyReport::new(seed);
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let u = random_state(n, r, &mut rng);
        let ud = u.to_dense();
        let z = gaussian_matrix(n, n, &mut rng);
        let sv = u.singular_values();
        let sigma_r = sv[r - 1];
        let vn = op.v_norm(&ud);
        let r_f = r as f64;

        let pz = op.v_norm(&tangent_project(&u, &z));
        let zn = op.v_norm(&z);
        let bound = (1.0 + r_f * vn * vn / (sigma_r * sigma_r)).sqrt() * zn;
        report.record("v_projection", trial, pz, bound, ROUND_OFF * zn);

        // worst factor ratio of the trial
        let (mut worst_obs, mut worst_bound, mut worst_ratio) = (0.0, 1.0, -1.0);
        for k in 0..r {
            for factor in [u.u1_factors(), u.u2_factors()] {
                let col: Vec<f64> = factor.column(k).iter().copied().collect();
                let obs = op.seminorm_1d(&col);
                let b = vn / sv[k];
                if obs / b > worst_ratio {
                    (worst_obs, worst_bound, worst_ratio) = (obs, b, obs / b);
                }
            }
        }
        report.record("factor_regularity", trial, worst_obs, worst_bound, 0.0);

        let mixed = op.mixed_seminorm(&ud);
        report.record("mixed_seminorm", trial, mixed, r_f / sigma_r * vn * vn, ROUND_OFF * vn);

        let model = DiffusionModel::rotation(
            rng.random_range(0.1..2.0),
            rng.random_range(0.1..2.0),
            rng.random_range(0.0..3.0),
        )
        .expect("positive eigenvalues");
        let t = rng.random_range(0.0..1.0);
        let a12 = model.alpha(t).a12;
        let a2u = op.apply_a2(&model, t, &ud).norm();
        report.record(
            "a2_bound",
            trial,
            a2u,
            2.0 * r_f * a12.abs() / sigma_r * vn * vn,
            ROUND_OFF * vn * vn * model.beta,
        );
    }
    report
}

/// Tangency of the divergence part and the cone property on random states
/// and times:
///
/// * `a1_tangency`: `|(I - P_u) A_1(t) u| / |A_1(t) u| <= 1e-10`
/// * `cone`: `|P_u u - u| / |u| <= 1e-12`
/// * `a1_projected_form`: `|a_1(u, v) - a_1(u, P_u v)| <= 1e-10 |A_1 u| |v|`
pub fn tangency_suite(n: usize, r: usize, trials: usize, seed: u64, model: &DiffusionModel) -> PropertyReport {
    let op = GalerkinOperator::build(n).expect("basis size is positive");
    let mut report = PropertyReport::new(seed);
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let u = random_state(n, r, &mut rng);
        let t = rng.random_range(0.0..1.0);
        let v = gaussian_matrix(n, n, &mut rng);
        check_tangency(&op, model, &u, t, &v, trial, &mut report);
    }
    report
}

pub(crate) fn check_tangency(
    op: &GalerkinOperator,
    model: &DiffusionModel,
    u: &LowRankState,
    t: f64,
    v: &nalgebra::DMatrix<f64>,
    trial: usize,
    report: &mut PropertyReport,
) {
    let ud = u.to_dense();
    let a1u = op.apply_a1(model, t, &ud);
    let a1n = a1u.norm();
    let normal = (&a1u - tangent_project(u, &a1u)).norm();
    report.record("a1_tangency", trial, normal / a1n, 1e-10, 0.0);

    let cone = (tangent_project(u, &ud) - &ud).norm() / ud.norm();
    report.record("cone", trial, cone, 1e-12, 0.0);

    let pv = tangent_project(u, v);
    let gap = (op.bilinear_a1(model, t, &ud, v) - op.bilinear_a1(model, t, &ud, &pv)).abs();
    report.record("a1_projected_form", trial, gap / (a1n * v.norm()), 1e-10, 0.0);
}
