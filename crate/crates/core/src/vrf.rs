//! Simulated verifiable random function.
//!
//! The proof is the secret itself. Revealing it after the block is published
//! gives the same unpredictable-then-verifiable behaviour a real VRF would
//! inside a single-process simulator.

use crate::oracle::digest;
use crate::types::{Digest256, RandomString, ValidatorKeys};

pub fn generate(beacon: &Digest256, keys: &ValidatorKeys) -> RandomString {
    RandomString { value: digest(&[keys.secret(), beacon]), proof: keys.secret().to_vec() }
}

/// Checks that `s` was produced from `beacon` by the holder of `pk`.
/// Malformed proofs are rejected rather than reported as errors.
pub fn verify(beacon: &Digest256, s: &RandomString, pk: &Digest256) -> bool {
    if s.proof.len() != 32 {
        return false;
    }
    digest(&[&s.proof]) == *pk && digest(&[&s.proof, beacon]) == s.value
}
