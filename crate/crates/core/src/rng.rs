//! Seed derivation for reproducible random streams.
//!
//! Every stream is a ChaCha8 generator keyed by `(master, label, index)`.
//! The 64-bit seed is the FNV-1a hash of the label folded with the master
//! seed and index and then mixed with SplitMix64, so the derivation is
//! stable across platforms and releases of this crate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used by every sampler in this crate.
pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the 64-bit seed for the stream `(master, label, index)`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(splitmix64(master ^ h).wrapping_add(index))
}

/// Open the stream `(master, label, index)`.
pub fn stream(master: u64, label: &str, index: u64) -> Stream {
    Stream::seed_from_u64(derive_seed(master, label, index))
}
