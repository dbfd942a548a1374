//! Seeded, splittable random streams.
//!
//! A stream is a ChaCha8 generator keyed by `seed` with its 64-bit stream
//! counter set to `stream_id`, so `(seed, id)` pairs give reproducible,
//! non-overlapping sequences. Parallel consumers partition work by stream id.

use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

/// Stream-id namespaces. Each consumer family owns the upper 16 bits so
/// that e.g. chain 3 of an LLC run never shares a stream with noise draw 3.
pub mod tag {
    pub const INIT: u16 = 1;
    pub const TRAIN: u16 = 2;
    pub const LLC_CHAIN: u16 = 3;
    pub const LLC_BASELINE: u16 = 4;
    pub const VOLUME: u16 = 5;
    pub const NOISE: u16 = 6;
    pub const PRUNE: u16 = 7;
    pub const DATA: u16 = 8;
    pub const NET: u16 = 9;
    pub const AUDIT: u16 = 10;
    pub const REDUNDANCY: u16 = 11;
    pub const LEMMA: u16 = 12;
    pub const TEACHER: u16 = 13;
}

/// Composes a stream id from a namespace tag and an index within it.
pub const fn stream_id(tag: u16, index: u64) -> u64 {
    ((tag as u64) << 48) | (index & 0xFFFF_FFFF_FFFF)
}

#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

/// Opens the stream `(seed, stream_id)`.
pub fn rng_stream(seed: u64, stream_id: u64) -> RngStream {
    let mut inner = ChaCha8Rng::seed_from_u64(seed);
    inner.set_stream(stream_id);
    RngStream { inner }
}

impl RngStream {
    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.normal();
        }
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    /// Uniform index in `0..n`. `n` must be positive.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Binomial(n, p) draw.
    pub fn binomial(&mut self, n: u64, p: f64) -> u64 {
        if p <= 0.0 {
            return 0;
        }
        if p >= 1.0 {
            return n;
        }
        Binomial::new(n, p)
            .expect("probability checked above")
            .sample(&mut self.inner)
    }

    /// Multinomial counts for `n` draws from `probs`, via sequential binomials.
    pub fn multinomial(&mut self, n: u64, probs: &[f64]) -> Vec<u64> {
        let mut counts = alloc::vec![0u64; probs.len()];
        let mut remaining = n;
        let mut mass = 1.0;
        for (i, &p) in probs.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            if i + 1 == probs.len() {
                counts[i] = remaining;
                break;
            }
            let c = self.binomial(remaining, (p / mass).clamp(0.0, 1.0));
            counts[i] = c;
            remaining -= c;
            mass -= p;
        }
        counts
    }

    /// `k` distinct indices from `0..n`, in draw order (partial Fisher-Yates).
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}
