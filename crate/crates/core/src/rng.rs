//! Counter-addressed random streams.
//!
//! A stream is identified by `(seed, chunk)`; the `k`-th draw inside it is a
//! pure function of `(seed, chunk, k)`, so results never depend on which
//! worker evaluates which chunk.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::function::erf::erfc_inv;

/// 64-bit words consumed by one purity sample (four 3-D points).
pub const WORDS_PER_SAMPLE: u64 = 12;

pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, chunk: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        rng.set_word_pos(0);
        Self { rng }
    }

    /// Stream positioned at the start of draw `draw` (in units of `words_per_draw` u64 words).
    pub fn at(seed: u64, chunk: u64, draw: u64, words_per_draw: u64) -> Self {
        let mut s = Self::new(seed, chunk);
        // ChaCha word positions count 32-bit words.
        s.rng.set_word_pos(2 * u128::from(draw) * u128::from(words_per_draw));
        s
    }

    /// Uniform on the open interval (0, 1) with 52-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        to_open_unit(self.rng.next_u64())
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        standard_normal(self.uniform())
    }
}

#[inline]
pub fn to_open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Inverse CDF of the standard normal; shared by the MC and QMC samplers.
#[inline]
pub fn standard_normal(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}
