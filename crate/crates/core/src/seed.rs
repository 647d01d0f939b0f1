//! Deterministic seed derivation.
//!
//! Every random stream in the crate comes from a 64-bit seed folded through
//! the SplitMix64 finalizer:
//!
//! ```text
//! mix(s, i) = splitmix64(s ^ i)
//! derive(base, [i0, i1, ..]) = mix(..mix(mix(base, i0), i1).., in)
//! ```
//!
//! so a `(base, indices)` tuple names one stream independently of the order
//! in which work items are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function (Steele, Lea and Flood constants).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(base: u64, indices: &[u64]) -> u64 {
    indices.iter().fold(base, |s, &i| splitmix64(s ^ i))
}

/// Independent generator for the stream named by `(base, indices)`.
pub fn stream(base: u64, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, indices))
}
