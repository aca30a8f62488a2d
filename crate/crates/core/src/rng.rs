//! Seed derivation and the generator type used throughout the crate.
//!
//! Every stochastic routine takes an explicit `u64` seed. Sub-streams (bootstrap
//! replicas, simulation blocks, per-row quasi-Monte-Carlo shifts) are keyed by a
//! pure function of the master seed and an index, so results never depend on
//! scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type SimRng = ChaCha12Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based child seed: a pure function of `(master, index)`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// Child seed keyed by a short path of indices, e.g. `(replica, block)`.
pub fn derive_seed_path(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |acc, &i| derive_seed(acc, i))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
