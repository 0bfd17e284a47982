//! Deterministic random streams.
//!
//! Everything stochastic in the crate draws from [`SeededRng`], a ChaCha8
//! stream with a tiny helper API. ChaCha output is specified byte-for-byte,
//! so any (seed, draw-order) pair reproduces bit-identical values on every
//! platform. Gaussians come from an in-crate Box-Muller transform rather than
//! a library sampler so the mapping from stream bytes to values can never
//! drift under a dependency upgrade.
//!
//! Seeds for subordinate streams are derived, never reused: [`derive_seed`]
//! is a splitmix64 mix of a parent seed and a counter, and [`name_seed`]
//! hashes a name (FNV-1a) for streams that must be stable across datasets.

use num_traits::Float;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PI: f64 = core::f64::consts::PI;

/// Deterministic RNG stream with the handful of draw shapes the crate needs.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl SeededRng {
    /// Stream seeded from a 64-bit value.
    pub fn new(seed: u64) -> Self {
        SeededRng { inner: ChaCha8Rng::seed_from_u64(seed), spare_normal: None }
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw via Box-Muller; pairs are cached so consecutive
    /// calls consume stream bytes at half rate.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare_normal = Some(radius * s);
        radius * c
    }

    /// Uniform index in [0, n). Uses the unbiased range sampler.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        self.inner.random_range(0..n)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// Raw 64-bit draw (seed material for subordinate streams).
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

/// Seed for the `index`-th subordinate stream of `root`.
///
/// splitmix64 finalizer over root xor (index+1) * golden ratio; the +1 keeps
/// index 0 from collapsing onto the root seed itself.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    let mut z = root ^ (index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit seed for a named stream (FNV-1a over the name's bytes).
pub fn name_seed(name: &str) -> u64 {
    let mut hash: u64 = 0xCBF2_9CE4_8422_2325;
    for byte in name.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
