use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{contract, Result};

/// SplitMix64 finalizer applied to a pair of words.
///
/// Used to derive stream ids from structured keys (surface id, agent, phase, ...).
pub fn mix64(a: u64, b: u64) -> u64 {
    fn fmix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    fmix(a ^ fmix(b.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// The same pair always yields the same variate sequence, independent of
/// how many other streams exist or which thread consumes this one. Give each
/// parallel unit of work its own stream, typically via [`RngStream::derive`].
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream keyed by this stream's identity and `tag`.
    ///
    /// Does not consume or depend on the current position of `self`.
    pub fn derive(&self, tag: u64) -> RngStream {
        RngStream::new(self.seed, mix64(self.stream_id, tag))
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        self.rng.sample(Open01)
    }

    /// Uniform index in `0..n`; `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        match u32::try_from(n) {
            Ok(m) => self.rng.random_range(0..m) as usize,
            Err(_) => self.rng.random_range(0..n),
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

/// `n` indices drawn uniformly from `0..n` with replacement.
pub fn sample_indices_with_replacement(rng: &mut RngStream, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.index(n)).collect()
}

/// One Laplace(0, b) draw by inverting the CDF.
pub fn sample_laplace(rng: &mut RngStream, b: f64) -> Result<f64> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(contract(format!("Laplace scale must be > 0, got {b}")));
    }
    let u = rng.uniform_open() - 0.5;
    Ok(-b * u.signum() * (1.0 - 2.0 * u.abs()).ln())
}

/// One Normal(0, σ²) draw.
pub fn sample_gaussian(rng: &mut RngStream, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(contract(format!("Gaussian sigma must be > 0, got {sigma}")));
    }
    Ok(sigma * rng.standard_normal())
}
