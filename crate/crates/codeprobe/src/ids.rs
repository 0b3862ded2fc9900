//! Content-addressed identifiers: `{stage}-{counter}-{short content hash}`.
//!
//! Rerunning a stage over the same inputs mints the same ids, which keeps
//! reruns idempotent and diffs readable.

use sha2::{Digest, Sha256};

/// Mint an id from a stage tag, a position, and the entity's content.
pub fn content_id(stage: &str, counter: u64, content: &str) -> String {
    format!("{stage}-{counter}-{}", short_hash(content))
}

/// First 8 hex characters of the content's SHA-256.
pub fn short_hash(content: &str) -> String {
    let digest = Sha256::digest(content.as_bytes());
    let mut out = String::with_capacity(8);
    for byte in &digest[..4] {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Hex SHA-256 of arbitrary bytes, for config hashes in run manifests.
pub fn config_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Stable 64-bit digest of a string, for deriving per-entity RNG seeds.
pub fn stable_u64(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}
