//! Seed derivation.
//!
//! Every random draw in a run comes from a ChaCha stream seeded by
//! `derive_seed(run_seed, stage, id)`, so results do not depend on the order
//! in which circuits are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of `(run_seed, stage, id)`. Independent of platform,
/// compiler version and `std`'s randomized hasher.
pub fn derive_seed(run_seed: u64, stage: &str, id: u64) -> u64 {
    // FNV-1a over the tag
    let mut tag: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.as_bytes() {
        tag ^= u64::from(*b);
        tag = tag.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut h = splitmix64(run_seed);
    h = splitmix64(h ^ tag);
    splitmix64(h ^ id)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn task_rng(run_seed: u64, stage: &str, id: u64) -> Rng {
    rng_from_seed(derive_seed(run_seed, stage, id))
}
