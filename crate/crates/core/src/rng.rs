//! Keyed random streams.
//!
//! Every draw is addressed by `(key, stream, position)`, so results do not
//! depend on how work is split across threads.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent key from a parent key, a domain tag and an index.
pub fn derive_key(key: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(key ^ splitmix64(domain)).wrapping_add(index))
}

/// Sequential reader over one `(key, stream)` pair, starting at position 0.
pub struct KeyedStream {
    rng: ChaCha8Rng,
}

impl KeyedStream {
    pub fn new(key: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Positions the stream at draw `index`; each draw consumes 128 bits.
    pub fn at(key: u64, stream: u64, index: u64) -> Self {
        let mut s = Self::new(key, stream);
        s.rng.set_word_pos(u128::from(index) * 4);
        s
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Pair of uniforms for one draw.
    fn uniform_pair(&mut self) -> (f64, f64) {
        let a = self.uniform();
        (a, self.uniform())
    }

    /// Unit-variance circularly-symmetric complex Gaussian.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let (u1, u2) = self.uniform_pair();
        Complex64::from_polar((-u1.ln()).sqrt(), 2.0 * PI * u2)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        let (u, _) = self.uniform_pair();
        lo + (hi - lo) * u
    }
}
