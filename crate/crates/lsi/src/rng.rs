//! Seeded pseudorandomness.
//!
//! All stochastic inputs of the engine (weight initialization, label flips,
//! feature noise, DP noise) flow through this generator so that every run is
//! reproducible from explicit seeds, bit-for-bit, on any platform.
//!
//! The core generator is SplitMix64 (Steele, Lea & Flood 2014; the same
//! update as Java's `SplittableRandom`): a 64-bit counter with an avalanche
//! finalizer. Gaussian draws use the Box-Muller transform on top of it.

use std::f64::consts::PI;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Deterministic 64-bit generator. Single-owner mutable state: move it or
/// derive fresh streams with [`Rng::derive`], never share one behind a lock.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
    cached_normal: Option<f64>,
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes three words into one seed (for deriving per-job noise streams).
pub fn mix3(a: u64, b: u64, c: u64) -> u64 {
    mix(a ^ mix(b.wrapping_add(GAMMA)) ^ mix(c.wrapping_mul(GAMMA) ^ 0x5851_F42D_4C95_7F2D))
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            state: seed,
            cached_normal: None,
        }
    }

    /// Independent stream derived from `(seed, stream)`. Used to hand each
    /// parallel job its own generator without coordinating draw counts.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mixed = mix(seed ^ mix(stream.wrapping_mul(GAMMA).wrapping_add(GAMMA)));
        Rng::new(mixed)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, bound) by rejection (no modulo bias).
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Standard normal draw (Box-Muller; the pair's second value is cached).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }
}
