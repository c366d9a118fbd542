//! Deterministic sub-stream derivation.
//!
//! One master seed drives every random quantity in the crate. Independent
//! streams are derived from the master seed and a context path of integers
//! (trial index, UE index, RRH index, ...), so results do not depend on the
//! order in which streams are consumed or on trial-level parallelism.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; decorrelates consecutive context words.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the 64-bit sub-seed for `path` under `master`.
///
/// The scheme is a splitmix64 chain: each path word (prefixed by the path
/// length to keep `[a]` and `[a, 0]` distinct) is folded into the state.
pub fn subseed(master: u64, path: &[u64]) -> u64 {
    let mut state = mix(master ^ 0x6a09_e667_f3bc_c908);
    state = mix(state ^ path.len() as u64);
    for &word in path {
        state = mix(state ^ word);
    }
    state
}

/// Independent RNG stream for `path` under `master`.
pub fn substream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subseed(master, path))
}
