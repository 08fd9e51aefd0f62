//! Seed derivation shared by every stochastic component.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; decorrelates nearby integer seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `ordinal` of a run seeded with `master`.
pub fn derive_seed(master: u64, ordinal: u64) -> u64 {
    master ^ mix64(ordinal)
}

pub fn rng_from(master: u64, ordinal: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, ordinal))
}
