//! Deterministic randomness.
//!
//! Every stochastic choice in the crate (data generation, initialization,
//! batch shuffling, direction sampling) flows through [`RandomSource`], a
//! thin wrapper over the ChaCha8 stream cipher generator. ChaCha8 is a
//! published, counter-based algorithm with identical output on every
//! platform, so a seed fully determines every experiment.
//!
//! Draw mappings are part of the contract and must not change:
//! - `uniform` consumes one `f64` draw in `[0, 1)`;
//! - `standard_normal` consumes two uniform draws and applies the
//!   Box-Muller cosine branch;
//! - `shuffle` runs a Fisher-Yates pass from the last index down;
//! - `distinct_indices` runs a partial Fisher-Yates over `0..n`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seedable deterministic random generator.
///
/// A `RandomSource` is single-owner: concurrent workers must each receive
/// their own child from [`RandomSource::split`] rather than sharing one
/// instance.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    /// Creates a generator for `seed` on stream 0.
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// The seed this source was created with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independently seeded child generator.
    ///
    /// Children use the same seed but a distinct ChaCha stream, so their
    /// draw sequences are independent of the parent's position and of each
    /// other.
    pub fn split(&self, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        RandomSource {
            seed: self.seed,
            rng,
        }
    }

    /// One draw uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// One draw uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// One standard-normal draw via Box-Muller (cosine branch).
    ///
    /// Consumes exactly two uniform draws; the sine twin is discarded to
    /// keep the uniform-to-normal mapping stateless.
    pub fn standard_normal(&mut self) -> f64 {
        // 1 - u maps [0,1) to (0,1], keeping the logarithm finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// One normal draw with the given mean and standard deviation.
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    /// Uniform integer in `0..n` (`n` must be positive).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        self.rng.gen_range(0..n)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }

    /// `k` distinct indices drawn uniformly from `0..n`, via a partial
    /// Fisher-Yates pass; order is the draw order.
    pub fn distinct_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        debug_assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    /// Raw 64-bit draw (used by tests asserting sequence determinism).
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
