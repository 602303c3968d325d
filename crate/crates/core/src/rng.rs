//! Deterministic, platform-independent random numbers.
//!
//! The generator is SplitMix64. Uniforms take the top 53 bits of a draw and
//! centre them in their bucket, `((x >> 11) + 0.5) * 2^-53`, so they lie in
//! the open interval (0, 1). Standard normals use the cosine branch of the
//! Box–Muller transform and consume exactly two uniforms each; the sine
//! branch is discarded so every normal has a fixed cost in the stream.

use std::f64::consts::TAU;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 stream. Its output is a pure function of the seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededGenerator {
    seed: u64,
    state: u64,
}

impl SeededGenerator {
    pub fn new(seed: u64) -> Self {
        Self { seed, state: seed }
    }

    /// Independent stream keyed by `(seed, t, lane)`.
    ///
    /// Particle methods draw particle `i` at time `t` from
    /// `stream(seed, t, i)` so that the result does not depend on the order
    /// in which particles are processed.
    pub fn stream(seed: u64, t: u64, lane: u64) -> Self {
        let key = mix64(mix64(mix64(seed ^ GOLDEN_GAMMA) ^ t) ^ lane.wrapping_add(GOLDEN_GAMMA));
        Self::new(key)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw in the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }

    /// Draws an index from a probability vector by inversion: the first `i`
    /// with `u < w_0 + ... + w_i`. Rounding shortfalls fall back to the last
    /// index carrying positive weight.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                last_positive = i;
            }
            acc += w;
            if u < acc {
                return i;
            }
        }
        last_positive
    }
}
