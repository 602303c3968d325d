#![allow(dead_code)]

pub mod grid;

use nalgebra::DMatrix;
use statespace::{DiscreteHmm, LinearGaussianModel, SeededGenerator};

pub fn random_simplex(n: usize, floor: f64, rng: &mut SeededGenerator) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let total: f64 = raw.iter().sum();
    let free = 1.0 - floor * n as f64;
    raw.iter().map(|v| floor + free * v / total).collect()
}

/// Random HMM whose every probability is at least `floor`.
pub fn random_hmm(k: usize, m: usize, floor: f64, rng: &mut SeededGenerator) -> DiscreteHmm {
    let initial = random_simplex(k, floor, rng);
    let t: Vec<f64> = (0..k).flat_map(|_| random_simplex(k, floor, rng)).collect();
    let e: Vec<f64> = (0..k).flat_map(|_| random_simplex(m, floor, rng)).collect();
    DiscreteHmm::new(
        initial,
        DMatrix::from_row_slice(k, k, &t),
        DMatrix::from_row_slice(k, m, &e),
    )
    .unwrap()
}

fn between(lo: f64, hi: f64, rng: &mut SeededGenerator) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

/// Scalar model whose posterior mass stays well inside `[-10, 10]`.
pub fn random_scalar_model(rng: &mut SeededGenerator) -> grid::ScalarModel {
    let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
    grid::ScalarModel {
        a: between(-0.9, 0.9, rng),
        c: sign * between(0.5, 1.5, rng),
        q: between(0.05, 0.3, rng),
        r: between(0.1, 1.0, rng),
        mu0: between(-1.0, 1.0, rng),
        sigma0: between(0.2, 1.5, rng),
    }
}

pub fn to_lgssm(m: &grid::ScalarModel) -> LinearGaussianModel {
    LinearGaussianModel::scalar(m.a, m.c, m.q, m.r, m.mu0, m.sigma0).unwrap()
}
