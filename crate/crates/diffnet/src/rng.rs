//! Deterministic RNG stream derivation.
//!
//! Every random draw in an experiment comes from a stream derived from the
//! master seed plus a (run, agent, purpose) tag, so results are bit-exact
//! regardless of execution order or Monte Carlo parallelism.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep streams for different uses disjoint even when they
/// share run and agent indices.
pub mod purpose {
    pub const TOPOLOGY: u64 = 1;
    pub const MODEL: u64 = 2;
    pub const DICTIONARY: u64 = 3;
    pub const STEP_SIZES: u64 = 4;
    pub const INPUT: u64 = 5;
    pub const NOISE: u64 = 6;
    pub const FEATURE_MAP: u64 = 7;
    pub const CSV_REPLAY: u64 = 8;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed for the (run, agent, purpose) sub-stream of a master seed.
pub fn derive_seed(master: u64, run: u64, agent: u64, purpose: u64) -> u64 {
    let mut state = master;
    let mut acc = splitmix64(&mut state);
    state ^= run.wrapping_mul(0xd134_2543_de82_ef95);
    acc ^= splitmix64(&mut state);
    state ^= agent.wrapping_mul(0xaf25_1af3_b0f0_25b5);
    acc ^= splitmix64(&mut state);
    state ^= purpose.wrapping_mul(0x9e6c_63d0_676a_9a99);
    acc ^ splitmix64(&mut state)
}

/// A fresh generator for the given sub-stream.
pub fn stream(master: u64, run: u64, agent: u64, purpose: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, run, agent, purpose))
}

/// Shared-object stream (dictionary, model, topology): no run or agent index.
pub fn shared_stream(master: u64, purpose: u64) -> ChaCha8Rng {
    stream(master, u64::MAX, u64::MAX, purpose)
}
