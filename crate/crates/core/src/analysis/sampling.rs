//! Random states, coefficients and sources for the property suites.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::galerkin::{Alpha, DiffusionModel, SourceSpec, SourceTerm, TimeProfile};
use crate::linalg;
use crate::manifold::LowRankState;

/// Smallest singular value drawn by [`random_state`], relative to the largest.
pub const SIGMA_RANGE_MIN: f64 = 1e-3;

/// Independent RNG stream for one trial.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `n x r` matrix with orthonormal columns (QR of a Gaussian matrix).
pub fn random_orthonormal<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    linalg::qr_nonneg(&gaussian_matrix(n, r, rng)).0
}

/// `r` singular values log-uniform on `[SIGMA_RANGE_MIN, 1]`, decreasing.
pub fn log_uniform_singulars<R: Rng + ?Sized>(r: usize, rng: &mut R) -> Vec<f64> {
    let lo = SIGMA_RANGE_MIN.ln();
    let mut s: Vec<f64> = (0..r).map(|_| (lo * rng.random::<f64>()).exp()).collect();
    s.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    s
}

/// Random rank-`r` state in SVD form: orthonormal factors from QR of
/// Gaussian matrices and log-uniform singular values.
pub fn random_state<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> LowRankState {
    let u = random_orthonormal(n, r, rng);
    let v = random_orthonormal(n, r, rng);
    let s = DMatrix::from_diagonal(&DVector::from_vec(log_uniform_singulars(r, rng)));
    LowRankState::from_parts(u, s, v).expect("sampled factors have consistent shapes")
}

/// Random symmetric positive definite coefficient with eigenvalues in
/// `[0.1, 2]` and a random principal axis.
pub fn random_alpha<R: Rng + ?Sized>(rng: &mut R) -> Alpha {
    let l1 = rng.random_range(0.1..2.0);
    let l2 = rng.random_range(0.1..2.0);
    let th: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let (c, s) = (th.cos(), th.sin());
    Alpha::new(l1 * c * c + l2 * s * s, (l2 - l1) * c * s, l1 * s * s + l2 * c * c)
}

/// Random admissible diffusion model: constant or rotating.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R) -> DiffusionModel {
    if rng.random::<bool>() {
        DiffusionModel::constant(random_alpha(rng)).expect("sampled coefficient is positive definite")
    } else {
        let l1 = rng.random_range(0.1..2.0);
        let l2 = rng.random_range(0.1..2.0);
        let omega = rng.random_range(0.0..3.0);
        DiffusionModel::rotation(l1, l2, omega).expect("positive eigenvalues")
    }
}

/// Random separable source with one to three terms.
pub fn random_source<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SourceSpec {
    let terms = rng.random_range(1..=3);
    let terms = (0..terms)
        .map(|_| {
            let c = rng.random_range(-1.0..1.0);
            let profile = match rng.random_range(0..3) {
                0 => TimeProfile::Constant(c),
                1 => TimeProfile::Linear(c),
                _ => TimeProfile::Cosine {
                    c,
                    omega: rng.random_range(0.5..10.0),
                },
            };
            SourceTerm {
                profile,
                p: DVector::from_fn(n, |_, _| StandardNormal.sample(rng)),
                q: DVector::from_fn(n, |_, _| StandardNormal.sample(rng)),
            }
        })
        .collect();
    SourceSpec::new(n, terms).expect("sampled terms match the basis")
}
