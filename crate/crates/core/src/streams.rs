//! Counter-based random streams.
//!
//! Every stream is keyed by `(master_seed, scope, replication, tag)` and seeded
//! with the SHA-256 digest of that key, so a stream never depends on how many
//! other streams exist or on which thread consumes it. Environment and noise
//! streams use an empty scope and are therefore shared by every policy in a
//! replication; policy streams are scoped by the policy name.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

pub const ENVIRONMENT: &str = "environment";
pub const CONTEXTS: &str = "contexts";
pub const NOISE: &str = "noise";
pub const POLICY: &str = "policy";
pub const DIAGNOSTICS: &str = "diagnostics";

pub fn derive_seed(master_seed: u64, scope: &str, replication: u64, tag: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"sparse-bandit/v1");
    h.update(master_seed.to_le_bytes());
    h.update((scope.len() as u64).to_le_bytes());
    h.update(scope.as_bytes());
    h.update(replication.to_le_bytes());
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    h.finalize().into()
}

pub fn stream(master_seed: u64, scope: &str, replication: u64, tag: &str) -> SimRng {
    SimRng::from_seed(derive_seed(master_seed, scope, replication, tag))
}
