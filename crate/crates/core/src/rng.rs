//! Seed derivation for reproducible ensembles.
//!
//! One 64-bit master seed feeds every run. Run `i` gets the stream
//! `ChaCha8Rng::seed_from_u64(derive_seed(master, i))`, and the avalanche
//! below is fixed so streams are identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type UrnRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-run seed from `(master, run_index)`.
pub fn derive_seed(master: u64, run_index: u64) -> u64 {
    let mixed = splitmix64(master.wrapping_add(GOLDEN_GAMMA));
    splitmix64(mixed ^ run_index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
}

pub fn stream(seed: u64) -> UrnRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn run_stream(master: u64, run_index: u64) -> UrnRng {
    stream(derive_seed(master, run_index))
}
