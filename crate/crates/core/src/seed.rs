//! Named seed sub-streams derived from one global seed.

use sha2::{Digest, Sha256};

/// Deterministic 64-bit seed for the stream `name` under `seed`.
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}
