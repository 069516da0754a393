//! Seeded random streams for reproducible trials.
//!
//! Every trial derives its randomness from `(base_seed, sinr_index, trial_index)`
//! only, and splits that trial seed into independent ChaCha streams per purpose.
//! Results therefore do not depend on execution order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-streams of one trial seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Channel = 0,
    Gaussian = 1,
    Impulse = 2,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial_index` at SINR grid point `sinr_index`.
pub fn trial_seed(base_seed: u64, sinr_index: usize, trial_index: usize) -> u64 {
    let h = splitmix64(base_seed);
    let h = splitmix64(h ^ sinr_index as u64);
    splitmix64(h ^ (trial_index as u64).rotate_left(32))
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
