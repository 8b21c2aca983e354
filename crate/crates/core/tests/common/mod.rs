#![allow(dead_code)]

use qkl::numlin::{jbar, mode_j};
use qkl::{OqhoModel, RealMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Symmetric positive definite `GᵀG/dim + shift·I`.
pub fn random_pd(rng: &mut ChaCha8Rng, dim: usize, shift: f64) -> RealMatrix {
    let g = gaussian(rng, dim, dim);
    g.transpose() * g / dim as f64 + RealMatrix::identity(dim, dim) * shift
}

/// Random physically realizable Hurwitz model: `Θ` a scaled `J_{n/2}`,
/// `R` PSD, `M` Gaussian; resampled until the drift is Hurwitz.
pub fn random_model(rng: &mut ChaCha8Rng, n: usize, m: usize) -> OqhoModel {
    loop {
        let scales: Vec<f64> = (0..n / 2).map(|_| rng.random_range(0.5..2.0)).collect();
        let theta = RealMatrix::from_fn(n, n, |r, c| {
            if r / 2 == c / 2 {
                scales[r / 2] * jbar()[(r % 2, c % 2)]
            } else {
                0.0
            }
        });
        let g = gaussian(rng, n, n) * 0.5;
        let energy = g.transpose() * g;
        let coupling = gaussian(rng, m, n);
        let model = OqhoModel::from_hamiltonian(theta, energy, coupling).expect("realizable by construction");
        if model.is_hurwitz() {
            return model;
        }
    }
}

pub fn canonical_jn(modes: usize) -> RealMatrix {
    mode_j(modes)
}
