//! Per-trial random streams.
//!
//! Every trial draws from its own ChaCha8 stream selected by `(seed, trial)`,
//! so trial `i` produces the same numbers no matter which worker runs it or
//! in what order trials are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

pub fn trial_rng(seed: u64, trial: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}
