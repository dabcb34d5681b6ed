//! Seeded random streams.
//!
//! Every stochastic component draws from its own ChaCha stream whose seed is
//! derived from the run seed plus a purpose tag and up to two indices. A
//! stream is therefore fully determined by `(root, tag, a, b)`, which lets a
//! run be resumed from a checkpoint without persisting generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags keep streams for different roles disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Init = 1,
    Network = 2,
    Episode = 3,
    Selection = 4,
    Baseline = 5,
    Sweep = 6,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(root: u64, tag: StreamTag, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(root);
    h = splitmix64(h ^ tag as u64);
    h = splitmix64(h ^ a);
    splitmix64(h ^ b.rotate_left(17))
}

pub fn stream(root: u64, tag: StreamTag, a: u64, b: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(root, tag, a, b))
}
