//! Deterministic seed splitting for reproducible, scheduler-independent
//! Monte Carlo.
//!
//! Streams form a tree: master seed → trajectory → interval → player. Each
//! node is derived by a SplitMix64-style mix, so any stream can be
//! reconstructed from its coordinates alone. Ensembles are therefore
//! invariant to worker count and work ordering, and the per-(interval,
//! player) streams realize the independence of the players' randomization
//! sources.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive child seed `index` from `seed`.
pub fn split(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Stream for player `player` (1 or 2) in interval `k` (1-based) of the
/// trajectory seeded by `traj_seed`.
pub fn player_stream(traj_seed: u64, interval: usize, player: u8) -> ChaCha8Rng {
    let s = split(split(traj_seed, interval as u64), player as u64);
    ChaCha8Rng::seed_from_u64(s)
}

/// Auxiliary stream for interval-level draws that belong to neither player
/// (kept separate so player streams stay untouched by harness needs).
pub fn aux_stream(traj_seed: u64, interval: usize) -> ChaCha8Rng {
    let s = split(split(traj_seed, interval as u64), 0);
    ChaCha8Rng::seed_from_u64(s)
}
