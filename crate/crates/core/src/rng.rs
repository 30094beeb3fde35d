//! Deterministic stream splitting.
//!
//! Every random draw in the crate flows from one 64-bit master seed. A
//! substream is addressed by a path of `(label, index)` pairs; each step
//! mixes the FNV-1a hash of the label and the index into the running seed
//! with the SplitMix64 finalizer. The resulting 64-bit value seeds a
//! ChaCha8 generator, so substreams are independent of thread scheduling.
//!
//! Labels in use: `"replication"`, `"truth"`, `"sample"`, `"noise"`,
//! `"init"`, `"chain"`, `"select"`, `"conjugate"`, `"monitor"`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of the substream `label[index]` below `seed`.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ fnv1a(label)) ^ index)
}

/// A generator for the substream `label[index]` below `seed`.
pub fn stream(seed: u64, label: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, label, index))
}
