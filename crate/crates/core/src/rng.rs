//! Counter-based derivation of independent random streams from one root seed.
//!
//! A stream is addressed by a path of integer labels, e.g.
//! `[REALIZATION, series, trial]`. The path is folded through SplitMix64 into
//! a ChaCha8 seed, so the stream for a given path never depends on which
//! other streams exist or the order in which they are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub mod label {
    pub const CODEBOOK: u64 = 1;
    pub const RANDOM_CODEBOOK: u64 = 2;
    pub const REALIZATION: u64 = 3;
    pub const UPLINK: u64 = 4;
    pub const INIT: u64 = 5;
    pub const VIRTUAL: u64 = 6;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit seed for the stream at `path` below `root`.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_mul(GOLDEN))))
}

pub fn stream(root: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}
