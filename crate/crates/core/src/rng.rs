//! Seed derivation for independent, reproducible random streams.
//!
//! Every stochastic component draws from its own stream keyed by
//! `(seed, stream, index)`, so adding draws in one component never shifts
//! another component's sequence. This is what makes paired-seed comparisons
//! between methods meaningful.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEVIATION: u64 = 0x01;
pub const SHADOW: u64 = 0x02;
pub const FLOWS: u64 = 0x03;
pub const FADING: u64 = 0x04;
pub const SURVEY: u64 = 0x05;
pub const CITY: u64 = 0x06;
pub const ROUTES: u64 = 0x07;
pub const TRIALS: u64 = 0x08;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream tag and an index into a new seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index)
}

pub fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, index))
}

/// Hashes an arbitrary key sequence into a uniform value in the open
/// interval (0, 1).
pub fn hash_unit(seed: u64, stream: u64, key: &[u64]) -> f64 {
    let mut h = derive_seed(seed, stream, key.len() as u64);
    for &k in key {
        h = splitmix64(h ^ k);
    }
    // 53 random mantissa bits, shifted off zero.
    ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}
