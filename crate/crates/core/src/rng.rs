//! Keyed per-sample random streams.
//!
//! Sample `i` of a run with master seed `s` always draws from the ChaCha8 stream
//! `i` under key `s`, so results do not depend on how samples are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn sample_rng(master_seed: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(sample_index);
    rng
}
