//! Splittable counter-based pseudo-random generator.
//!
//! Every consumer of randomness in this crate (signal generators, the
//! measurement matrix, EM initialization, k-means, Monte-Carlo estimates)
//! draws from its own [`Stream`] derived from a master seed, so the streams
//! are independent and results do not depend on evaluation order. A
//! generator is a pure function of `(stream key, counter)`; output `n` is
//! the SplitMix64 finalizer applied to `key + n * GOLDEN`.

use crate::math;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline(always)]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A key in the stream tree. `derive` produces decorrelated child streams;
/// `rng` starts an actual generator on the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            key: mix64(seed ^ 0x6c62_272e_07bb_0142),
        }
    }

    /// Child stream for the given tag.
    pub fn derive(&self, tag: u64) -> Stream {
        Stream {
            key: mix64(self.key ^ mix64(tag.wrapping_add(GOLDEN))),
        }
    }

    /// Child stream keyed by two tags.
    pub fn derive2(&self, a: u64, b: u64) -> Stream {
        self.derive(a).derive(b)
    }

    pub fn rng(&self) -> Rng {
        Rng {
            key: self.key,
            counter: 0,
            spare_normal: None,
        }
    }
}

/// Sequential generator over one stream.
#[derive(Debug, Clone)]
pub struct Rng {
    key: u64,
    counter: u64,
    spare_normal: Option<f64>,
}

impl Rng {
    #[inline(always)]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)`.
    #[inline(always)]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform in `(0, 1)`, safe as a `ln` argument.
    #[inline(always)]
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Uniform in `[lo, hi)`.
    #[inline(always)]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Index uniform in `0..n`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box-Muller; the second member of each pair is
    /// cached for the next call.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let (z0, z1) = self.normal_pair();
        self.spare_normal = Some(z1);
        z0
    }

    /// Two independent standard normals.
    #[inline]
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        let r = math::sqrt(-2.0 * math::ln(u1));
        let theta = math::TAU * u2;
        (r * math::cos(theta), r * math::sin(theta))
    }

    /// Zero-mean Laplace with the given scale (variance `2 * scale^2`).
    #[inline]
    pub fn laplace(&mut self, scale: f64) -> f64 {
        let u = self.uniform_open() - 0.5;
        let sign = if u < 0.0 { -1.0 } else { 1.0 };
        -scale * sign * math::ln(1.0 - 2.0 * math::abs(u))
    }

    /// `+1` or `-1` with equal probability.
    #[inline]
    pub fn rademacher(&mut self) -> f64 {
        if self.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}
