//! Seeded fixtures shared by the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use linearization;
use linearization::{Dataset, Example, SparseVector, Task};

/// `n` projected values spread over `[-100, 100)`.
pub fn projections(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-100.0..100.0)).collect()
}

/// Alternating 0/1 classes.
pub fn classes(n: usize) -> Vec<u8> {
    (0..n).map(|i| (i % 2) as u8).collect()
}

/// Binary dataset whose label is the sign of a fixed linear score, with
/// roughly `density * dim` nonzeros per row.
pub fn sparse_binary(n: usize, dim: usize, density: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let examples = (0..n)
        .map(|_| {
            let mut entries = Vec::new();
            for i in 1..=dim {
                if rng.random_bool(density) {
                    entries.push((i, rng.random_range(-1.0..1.0)));
                }
            }
            let score: f64 = entries.iter().map(|&(i, v)| w[i - 1] * v).sum();
            Example {
                features: SparseVector::new(entries).expect("ascending indices"),
                target: f64::from(u8::from(score > 0.0)),
            }
        })
        .collect();
    let mut d = Dataset::from_examples(examples, Task::Binary).expect("binary targets");
    d.n_features = dim;
    d
}
