//! Seeded random streams.
//!
//! Every run owns one root seed. Independent sub-streams (one per optimizer,
//! per bet-and-run sub-run, per poisoning trial, ...) are derived by hashing
//! `(root_seed, label)` with SHA-256 and seeding a ChaCha8 generator from the
//! first eight bytes of the digest (little endian). Both algorithms are fully
//! specified, so a trace replays identically on any platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

/// Identifier written into every trace file.
pub const RNG_ID: &str = "chacha8+sha256-substreams/v1";

pub type Stream = ChaCha8Rng;

pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(root: u64, label: &str) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label))
}

/// `dim` independent N(0, 1) draws.
pub fn standard_normal(rng: &mut Stream, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = stream(42, "x").random_iter().take(4).collect();
        let b: Vec<u64> = stream(42, "x").random_iter().take(4).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn labels_split_streams() {
        assert_ne!(derive_seed(42, "a"), derive_seed(42, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
    }

    #[test]
    fn derived_seed_is_pinned() {
        // Cross-platform anchor: changing this breaks every stored trace.
        let first = derive_seed(0, "");
        assert_eq!(first, derive_seed(0, ""));
        let mut h = Sha256::new();
        h.update(0u64.to_le_bytes());
        let d = h.finalize();
        assert_eq!(first.to_le_bytes(), d[..8]);
    }
}
