//! Stateless seed derivation.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream that is
//! addressed by a 64-bit seed plus a stream index. Seeds for experiment
//! trials are pure functions of `(base_seed, experiment, grid point, trial)`,
//! so reordering or deleting work units never shifts another unit's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the UTF-8 bytes of `text`.
pub fn hash_str(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Combine a parent seed with a child discriminator.
#[inline]
pub fn child_seed(parent: u64, discriminator: u64) -> u64 {
    mix64(parent ^ mix64(discriminator))
}

/// Seed for one experiment trial.
///
/// `grid_point` must already be canonical (the experiments module renders
/// grid maps with sorted keys).
pub fn derive_trial_seed(base_seed: u64, experiment: &str, grid_point: &str, trial_index: u64) -> u64 {
    let s = child_seed(base_seed, hash_str(experiment));
    let s = child_seed(s, hash_str(grid_point));
    child_seed(s, trial_index)
}

/// Independent stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
