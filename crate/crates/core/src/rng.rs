//! Counter-based random streams.
//!
//! Every draw is a pure function of `(key, counter)`, so any implementation that
//! follows the recipe below produces the same numbers on every platform:
//!
//! ```text
//! mix(v)      = v ^= v >> 30; v *= 0xBF58476D1CE4E5B9;
//!               v ^= v >> 27; v *= 0x94D049BB133111EB;
//!               v ^= v >> 31                              (SplitMix64 finalizer)
//! key(s, r)   = mix(mix(s ^ 0x6A09E667F3BCC909) ^ (r + 1) * 0x9E3779B97F4A7C15)
//! word(k, i)  = mix(k + (i + 1) * 0x9E3779B97F4A7C15)      (wrapping arithmetic)
//! uniform     = (word >> 11) * 2^-53                       in [0, 1)
//! ```
//!
//! `s` is the base seed, `r` the run index and `i` the per-stream call counter.

/// Additive constant of SplitMix64 (the 64-bit golden ratio).
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
/// Whitening constant applied to the base seed (first 64 bits of frac(sqrt 2)).
pub const SEED_WHITENER: u64 = 0x6A09_E667_F3BC_C909;

#[inline]
pub fn mix64(mut v: u64) -> u64 {
    v ^= v >> 30;
    v = v.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    v ^= v >> 27;
    v = v.wrapping_mul(0x94D0_49BB_1331_11EB);
    v ^ (v >> 31)
}

/// Derives the stream key for `(base_seed, run_index)`.
pub fn stream_key(base_seed: u64, run_index: u64) -> u64 {
    mix64(mix64(base_seed ^ SEED_WHITENER) ^ run_index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
}

/// A seeded, splittable stream of 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomStream {
    key: u64,
    counter: u64,
}

impl RandomStream {
    pub fn new(base_seed: u64, run_index: u64) -> Self {
        Self { key: stream_key(base_seed, run_index), counter: 0 }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Independent child stream; the parent is left untouched.
    pub fn split(&self, index: u64) -> Self {
        Self { key: stream_key(self.key, index), counter: 0 }
    }

    /// Number of words drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// The word at an absolute position, without advancing.
    pub fn word_at(&self, index: u64) -> u64 {
        mix64(self.key.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let w = self.word_at(self.counter);
        self.counter = self.counter.wrapping_add(1);
        w
    }

    /// Uniform variate in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform variate in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// `+1` or `-1` with equal probability.
    pub fn rademacher(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Standard normal via Box–Muller (consumes two words, uses the cosine branch).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Inverse-CDF categorical draw from nonnegative weights summing to `total`.
    ///
    /// Returns the smallest index whose cumulative weight exceeds `u * total`;
    /// consumes exactly one uniform.
    pub fn categorical(&mut self, weights: &[f64], total: f64) -> usize {
        let target = self.uniform() * total;
        categorical_index(weights, target)
    }
}

/// Smallest index `i` with `sum(weights[..=i]) > target`, skipping zero weights.
pub fn categorical_index(weights: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if acc > target {
                return i;
            }
        }
    }
    last_positive
}
