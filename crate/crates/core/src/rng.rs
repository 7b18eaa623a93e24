//! Seed derivation and per-task random streams.
//!
//! Every simulated total, bootstrap replicate and Markov chain owns a
//! generator derived from `(seed, purpose, index)`, so results do not depend
//! on scheduling or thread count.

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SimRng = Xoshiro256PlusPlus;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for a named purpose and index.
#[inline]
pub fn derive(seed: u64, purpose: u64, index: u64) -> u64 {
    mix64(mix64(seed ^ mix64(purpose)) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

#[inline]
pub fn stream(seed: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive(seed, purpose::STREAM, index))
}

/// Purpose tags used with [`derive`].
pub mod purpose {
    pub const STREAM: u64 = 1;
    pub const SAMPLE: u64 = 2;
    pub const HISTORY: u64 = 3;
    pub const REPLICATE: u64 = 4;
    pub const CHAIN: u64 = 5;
    pub const PREDICTIVE: u64 = 6;
    pub const POSTERIOR_FREQ: u64 = 7;
}

/// Uniform on the open interval (0, 1) with 53-bit resolution.
#[inline]
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// A fresh generator seeded from another one.
pub fn fork<R: Rng + ?Sized>(rng: &mut R) -> SimRng {
    SimRng::seed_from_u64(rng.random())
}
