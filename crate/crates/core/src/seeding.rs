//! Deterministic derivation of independent RNG streams.
//!
//! Every randomized stage (data generation, partitioning, weight init,
//! shuffling, ...) draws from its own stream, derived from the experiment
//! seed plus a list of integer tags identifying the stage. Derivation is a
//! splitmix64 walk, so streams are decorrelated and stable across runs and
//! platforms, and adding a stage never perturbs the streams of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a stage-identifying tag list.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    let mut state = seed;
    let mut out = splitmix64(&mut state);
    for &tag in tags {
        state ^= tag.wrapping_mul(0xd605_1c7e_dd90_2b6b).rotate_left(17);
        out ^= splitmix64(&mut state);
    }
    out
}

/// A ChaCha stream keyed by `derive(seed, tags)`.
pub fn stream(seed: u64, tags: &[u64]) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive(seed, tags))
}
