//! Reproducible random number generation.
//!
//! All sampling in this crate goes through a ChaCha8 stream cipher seeded
//! with a `u64`, with Gaussian variates produced by the Box-Muller transform.
//! Both pieces are fully specified algorithms with no platform-dependent
//! state, so sample streams are identical across machines and builds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One standard normal draw via Box-Muller. Consumes exactly two uniforms
/// from the stream; the second variate of the pair is discarded so the
/// stream position never depends on call history.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let mut u1: f64 = rng.gen();
    // gen() may return exactly 0, which ln() cannot take.
    while u1 <= 0.0 {
        u1 = rng.gen();
    }
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
