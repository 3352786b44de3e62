#![allow(dead_code)]

use ising_trinity::ModelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_spec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> ModelSpec {
    let delta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let upper: Vec<f64> = (0..n * (n - 1) / 2)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    ModelSpec::from_upper(delta, &upper).unwrap()
}

/// Couplings from the off-diagonal of `L L^T` with equal-norm rows, so the
/// minimal diagonal shift leaves a matrix of rank `k`.
pub fn low_rank_spec(rng: &mut ChaCha8Rng, n: usize, k: usize, scale: f64) -> ModelSpec {
    let mut l = vec![vec![0.0; k]; n];
    for row in l.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        for v in row.iter_mut() {
            *v *= scale / norm;
        }
    }
    let sigma: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        l[i].iter().zip(&l[j]).map(|(a, b)| a * b).sum()
                    }
                })
                .collect()
        })
        .collect();
    let delta = (0..n).map(|_| rng.random_range(-0.8..0.8)).collect();
    ModelSpec::new(delta, sigma).unwrap()
}
