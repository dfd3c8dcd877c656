//! Brute-force references shared by the integration tests.

#![allow(dead_code)]

use geomatch::linalg::{inner, OrthogonalMatrix};
use geomatch::models::{observe, Instance, ModelKind};
use geomatch::estimators::Factors;
use geomatch::{Matrix, Permutation};
use itertools::Itertools;

pub fn all_permutations(n: usize) -> Vec<Permutation> {
    (0..n)
        .permutations(n)
        .map(|p| Permutation::new(p).unwrap())
        .collect()
}

/// `Σ_i W[i][π(i)]`.
pub fn assignment_value(w: &Matrix, p: &Permutation) -> f64 {
    (0..p.len()).map(|i| w[(i, p.apply(i))]).sum()
}

pub fn brute_lap_max(w: &Matrix) -> f64 {
    all_permutations(w.nrows())
        .iter()
        .map(|p| assignment_value(w, p))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `max_π max_{Q ∈ qs} ⟨B^{1/2}, Π A^{1/2} Q⟩`, evaluated from the
/// definition with explicit permutation matrices.
pub fn brute_double_max(a: &Matrix, b: &Matrix, qs: &[OrthogonalMatrix]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for p in all_permutations(a.nrows()) {
        let pa = p.to_matrix() * a;
        for q in qs {
            best = best.max(inner(b, &(&pa * q.as_matrix())));
        }
    }
    best
}

/// `max_π ‖(A^{1/2})ᵀ Πᵀ B^{1/2}‖_F`.
pub fn brute_qap(f: &Factors) -> f64 {
    all_permutations(f.n())
        .iter()
        .map(|p| (f.a.transpose() * p.to_matrix().transpose() * &f.b).norm())
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn dot_factors(n: usize, d: usize, sigma: f64, seed: u64) -> (Instance, Factors) {
    let inst = Instance::from_seed(n, d, sigma, None, seed).unwrap();
    let f = Factors::from_observation(&observe(&inst, ModelKind::DotProduct), d).unwrap();
    (inst, f)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
