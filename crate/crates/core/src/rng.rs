//! Deterministic random streams.
//!
//! All randomness comes from ChaCha8 (`rand_chacha`), a counter-based
//! generator. A trial's generator is keyed by the master seed and uses the
//! trial index as its stream id, so trials are reproducible regardless of
//! how they are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

/// Generator for trial `index` under `master_seed`.
pub fn trial_rng(master_seed: u64, index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Generator for a plain seed.
pub fn seeded(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}
