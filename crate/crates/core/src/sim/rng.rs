//! Per-trial random streams.
//!
//! Every trial draws from ChaCha8, a counter-based generator: the 64-bit key
//! comes from the experiment seed mixed with the grid cell, and the trial
//! index selects the ChaCha stream. Trials therefore never share state and
//! their output does not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key for one grid cell (e.g. one δ) of an experiment.
pub fn cell_seed(seed: u64, cell: u64) -> u64 {
    mix64(seed ^ mix64(cell.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn trial_rng(seed: u64, trial: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}
