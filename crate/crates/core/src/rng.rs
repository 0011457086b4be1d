//! Deterministic derivation of random streams.
//!
//! Every random decision in the crate comes from a ChaCha8 stream seeded by
//! mixing a global seed with string keys (clip id, user id, expert index).
//! The mixing rule is: FNV-1a 64 over the UTF-8 bytes of each key (keys are
//! separated by a 0xff byte, which never occurs in UTF-8), XOR with the seed,
//! then one round of the SplitMix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut hash = FNV_OFFSET;
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hash ^= 0xff;
            hash = hash.wrapping_mul(FNV_PRIME);
        }
        for &b in *part {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(FNV_PRIME);
        }
    }
    hash
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the stream identified by `seed` and `keys`.
pub fn mix_seed(seed: u64, keys: &[&str]) -> u64 {
    let parts: Vec<&[u8]> = keys.iter().map(|k| k.as_bytes()).collect();
    splitmix64(fnv1a(&parts) ^ seed)
}

pub fn stream(seed: u64, keys: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, keys))
}
