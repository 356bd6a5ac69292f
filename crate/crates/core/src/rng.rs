//! Seed derivation.
//!
//! Every random quantity in the crate comes from a ChaCha8 stream whose seed
//! is a hash of the master seed and a path of integer tags (experiment,
//! replication, grid point, purpose, tree index, ...). Two different paths
//! give statistically independent streams, and the stream a task sees does not
//! depend on which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes `master` together with an ordered list of tags.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for (depth, &tag) in path.iter().enumerate() {
        h = splitmix64(h ^ splitmix64(tag ^ (depth as u64).wrapping_mul(GOLDEN)));
    }
    h
}

/// Stable 64-bit FNV-1a hash, used to turn experiment ids into tags.
pub fn tag_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Purpose tags shared by the harness so train / validation / test data of a
/// replication never share a stream.
pub mod purpose {
    pub const TRAIN: u64 = 1;
    pub const VALIDATION: u64 = 2;
    pub const TEST: u64 = 3;
    pub const FIT: u64 = 4;
    pub const NOISE: u64 = 5;
    pub const FOLDS: u64 = 6;
    pub const DESIGN: u64 = 7;
}
