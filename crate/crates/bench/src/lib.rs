//! Seeded fixture builders shared by the benchmarks, sized like realistic
//! workloads: wide sample matrices and spatial inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use metfa::{Input, SampleMatrix};

/// A seeded `n_samples` x `n_features` matrix of log-normal scores, the
/// heavy-tailed shape attribution noise tends to have.
pub fn lognormal_matrix(n_samples: usize, n_features: usize, seed: u64) -> SampleMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n_samples * n_features)
        .map(|_| {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            (0.4 * z).exp()
        })
        .collect();
    SampleMatrix::new(n_samples, n_features, values).expect("fixture matrix")
}

/// A seeded square image input with values in `[0, 1)`.
pub fn image_input(side: u16, seed: u64) -> Input {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..side as usize * side as usize)
        .map(|_| rng.gen::<f64>())
        .collect();
    Input::dense_with_shape(values, side, side).expect("fixture input")
}

/// A seeded attribution map over `n_features` scores in `[0, 1)`.
pub fn random_map(n_features: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_features).map(|_| rng.gen::<f64>()).collect()
}
