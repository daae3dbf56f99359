//! Random problem instances shared by the integration tests.
#![allow(dead_code)]

use countmap::graph::Laplacian;
use countmap::grid::CountVector;
use countmap::model::{PenalizedPoisson, PopulationField};
use countmap::sparse::SparseMatrix;
use countmap::transition::TransitionMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Column-stochastic `m×n` matrix, `m ≥ n`, with every row and column
/// carrying at least one entry.
pub fn random_transition(rng: &mut ChaCha8Rng, m: usize, n: usize, extra_per_column: usize) -> TransitionMatrix {
    assert!(m >= n);
    let mut triplets = Vec::new();
    for i in 0..m {
        triplets.push((i, i % n, rng.random_range(0.1..1.0)));
    }
    for j in 0..n {
        for _ in 0..extra_per_column {
            triplets.push((rng.random_range(0..m), j, rng.random_range(0.1..1.0)));
        }
    }
    let raw = SparseMatrix::from_triplets(m, n, triplets).unwrap();
    let sums = raw.column_sums();
    let normalized = raw.triplets().map(|(i, j, v)| (i, j, v / sums[j]));
    TransitionMatrix::new(SparseMatrix::from_triplets(m, n, normalized).unwrap()).unwrap()
}

/// A weighted chain over `n` nodes plus `extra` random chords.
pub fn random_laplacian(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> Laplacian {
    let mut edges: Vec<(usize, usize, f64)> = (1..n).map(|j| (j - 1, j, rng.random_range(0.1..2.0))).collect();
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.push((a, b, rng.random_range(0.1..2.0)));
        }
    }
    Laplacian::from_edges(n, edges).unwrap()
}

pub fn random_psi(rng: &mut ChaCha8Rng, n: usize) -> PopulationField {
    PopulationField::from_log((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Counts in `0..=12`, roughly a quarter of them zero.
pub fn random_counts(rng: &mut ChaCha8Rng, m: usize) -> CountVector {
    CountVector::new(
        (0..m)
            .map(|_| {
                if rng.random_bool(0.25) {
                    0
                } else {
                    rng.random_range(1..=12)
                }
            })
            .collect(),
    )
}

pub fn random_theta(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Central differences with step `1e-6·max(1, |θ_j|)`.
pub fn finite_difference(problem: &PenalizedPoisson<'_>, theta: &[f64]) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|j| {
            let h = 1e-6 * theta[j].abs().max(1.0);
            t[j] = theta[j] + h;
            let up = problem.objective(&t).unwrap();
            t[j] = theta[j] - h;
            let down = problem.objective(&t).unwrap();
            t[j] = theta[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a − b| / max(1, |a|, |b|)`, the largest over coordinates.
pub fn max_scaled_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}
