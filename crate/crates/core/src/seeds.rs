//! Deterministic seed splitting.
//!
//! All randomness in the toolkit flows from a single root seed. Subsystems
//! derive their own seeds by hashing `(root, purpose)` so that adding or
//! reordering consumers never shifts another consumer's stream.

use sha2::{Digest, Sha256};

/// Derive a child seed from a root seed and a purpose label.
///
/// The same `(root, purpose)` pair always yields the same child seed,
/// independent of platform or call order.
pub fn derive_seed(root: u64, purpose: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(purpose.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_across_calls() {
        assert_eq!(derive_seed(7, "sweep/size=30"), derive_seed(7, "sweep/size=30"));
    }

    #[test]
    fn distinct_purposes_decorrelate() {
        assert_ne!(derive_seed(7, "model"), derive_seed(7, "task"));
        assert_ne!(derive_seed(7, "model"), derive_seed(8, "model"));
    }
}
