#![allow(dead_code)]

use ashbm::problems::{generate_gaussian_problem, GaussianSpec, LinearSystem};
use ashbm::vector;

pub fn gaussian(m: usize, n: usize, rank: usize, kappa: f64, seed: u64) -> LinearSystem {
    generate_gaussian_problem(GaussianSpec { m, n, rank, kappa }, seed).unwrap()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = vector::norm(b).max(f64::MIN_POSITIVE);
    vector::dist_sq(a, b).sqrt() / scale
}

pub fn min_norm(system: &LinearSystem) -> &[f64] {
    system.min_norm.as_deref().expect("generated systems carry A^+ b")
}
