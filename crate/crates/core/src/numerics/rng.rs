//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator seeded through `SeedableRng::seed_from_u64`,
//! which is specified bit-for-bit by `rand_core` and therefore identical on every
//! platform. Gaussian variates use the ziggurat sampler from `rand_distr`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A single-owner, reproducible random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for replica `index` of an ensemble rooted at `base_seed`.
    ///
    /// The derivation is `base_seed ^ index`, so a replica's randomness depends only on
    /// its own index and never on how many other cells or replicas exist.
    pub fn for_replica(base_seed: u64, index: u64) -> Self {
        Self::new(replica_seed(base_seed, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform draw on `[lo, hi)`.
    #[inline]
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Derive an independent child stream (used to hand sub-tasks their own stream).
    pub fn fork(&mut self) -> RngStream {
        RngStream::new(self.inner.next_u64())
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

pub fn replica_seed(base_seed: u64, index: u64) -> u64 {
    base_seed ^ index
}

/// `n` i.i.d. samples from `N(0, sigma^2)`. A zero width yields exact zeros.
pub fn gaussian_draw(n: usize, sigma: f64, rng: &mut RngStream) -> Vec<f64> {
    assert!(sigma >= 0.0, "gaussian width must be nonnegative");
    // Adding +0 maps the -0 of `0 * negative` to +0.
    (0..n).map(|_| sigma * rng.normal() + 0.0).collect()
}
