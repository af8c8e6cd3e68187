//! Seed derivation for reproducible runs.
//!
//! All randomness in a pipeline flows from a single user seed. Sub-seeds
//! are derived by hashing the seed together with a purpose string (layer
//! name, epoch number, sample index, ...) so that the draw consumed by one
//! component never depends on how many draws another component made.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a, fixed here so derived seeds never change across releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a sub-seed from a root seed and a purpose string.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    fnv1a(purpose.as_bytes()) ^ seed.rotate_left(17)
}

/// Derives a sub-seed that also depends on a sequence of counters
/// (epoch, step, sample index, ...).
pub fn derive_seed_indexed(seed: u64, purpose: &str, indices: &[u64]) -> u64 {
    let mut h = derive_seed(seed, purpose);
    for &ix in indices {
        h = fnv1a(&[h.to_le_bytes(), ix.to_le_bytes()].concat());
    }
    h
}

/// The stream cipher RNG used throughout; small state, stable output.
pub fn rng_for(seed: u64, purpose: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, purpose))
}
