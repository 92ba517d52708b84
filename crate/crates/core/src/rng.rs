//! Keyed deterministic random streams.
//!
//! Every random decision in the toolkit draws from a stream derived from a
//! run seed plus a string key (instance id, purpose label, language). Streams
//! are independent of each other and of request arrival order, which is what
//! makes concurrent runs reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive an independent RNG for `(seed, parts)`. Each part is length-prefixed
/// before hashing so distinct key tuples never collide.
pub fn keyed_stream(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// One uniform draw in [0, 1) from the keyed stream.
pub fn keyed_unit(seed: u64, parts: &[&str]) -> f64 {
    keyed_stream(seed, parts).gen::<f64>()
}

/// One uniform index in [0, k) from the keyed stream.
pub fn keyed_index(seed: u64, parts: &[&str], k: usize) -> usize {
    debug_assert!(k > 0);
    keyed_stream(seed, parts).gen_range(0..k)
}

/// Hex SHA-256 of arbitrary bytes; used for config digests, template hashes,
/// and the mock model's text-to-instance side channel.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
