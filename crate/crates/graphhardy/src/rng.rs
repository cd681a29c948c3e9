//! Seeded, splittable randomness for reproducible verification sweeps.
//!
//! All harness randomness comes from a counter-based ChaCha generator: one
//! user seed, one stream per trial. Identical seeds give identical trial
//! inputs regardless of how trials are scheduled.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for trial `index` under the given master seed.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Standard normal vector of length `n`.
pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // Box-Muller keeps us independent of rand_distr.
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        out.push(r * th.cos());
        if out.len() < n {
            out.push(r * th.sin());
        }
    }
    out
}

/// Gaussian vector with the μ-weighted mean projected out.
pub fn mean_zero_gaussian(rng: &mut ChaCha8Rng, mu: &[f64]) -> Vec<f64> {
    let mut f = gaussian_vector(rng, mu.len());
    let total: f64 = mu.iter().sum();
    let mean: f64 = f.iter().zip(mu).map(|(v, m)| v * m).sum::<f64>() / total;
    for v in &mut f {
        *v -= mean;
    }
    f
}
