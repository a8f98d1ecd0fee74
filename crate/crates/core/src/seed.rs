//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded from a base seed and a stream label, so independent stages never
//! share state and any stage can be replayed in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn label_hash(label: &str) -> u64 {
    // FNV-1a
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Derives a child seed from `base` for the named stream and index.
pub fn derive(base: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ label_hash(label)) ^ splitmix64(index.wrapping_add(0x5851_f42d)))
}

pub fn rng(base: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, label, index))
}
