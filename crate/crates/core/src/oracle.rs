//! Random-oracle helpers over SHA-256.

use sha2::{Digest, Sha256};

use crate::types::Digest256;

const TWO_POW_53: f64 = (1u64 << 53) as f64;

/// SHA-256 of the concatenation of `parts`.
pub fn digest(parts: &[&[u8]]) -> Digest256 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Maps a digest to a uniform real in `[0, 1)` using its leading bits.
///
/// The first 64 bits are read big-endian and truncated to 53 so that the
/// division is exact and the result can never round up to 1.0.
pub fn uniform_from_digest(d: &Digest256) -> f64 {
    let mut head = [0u8; 8];
    head.copy_from_slice(&d[..8]);
    uniform_from_bits(u64::from_be_bytes(head))
}

/// The same map applied to 64 bits already extracted.
pub fn uniform_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 / TWO_POW_53
}

/// Uniform real in `[0, 1)` derived from the concatenation of `parts`.
pub fn uniform(parts: &[&[u8]]) -> f64 {
    uniform_from_digest(&digest(parts))
}
