//! Seeded Gaussian sampling.
//!
//! The pipeline is fixed so that a seed reproduces the same stream on every
//! platform: a ChaCha12 generator seeded from a 64-bit seed, uniform doubles
//! taken from the top 53 bits of each output word, and Box-Muller for the
//! normal transform performed entirely in double precision.  High-precision
//! consumers widen the doubles afterwards.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

pub struct GaussianSource {
    rng: ChaCha12Rng,
    spare: Option<f64>,
}

impl GaussianSource {
    pub fn new(seed: u64) -> Self {
        GaussianSource {
            rng: ChaCha12Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform in the open interval (0, 1).
    fn next_uniform(&mut self) -> f64 {
        // 53 significant bits, offset by half an ulp so 0 is never produced.
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal deviate (Box-Muller, pair cached).
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}
