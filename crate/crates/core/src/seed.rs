//! Deterministic RNG derivation. Every random choice in the crate comes from
//! a ChaCha stream keyed by a hash of explicit inputs, never from global state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// A component of a derivation key.
pub enum Part<'a> {
    Str(&'a str),
    U64(u64),
}

impl<'a> From<&'a str> for Part<'a> {
    fn from(s: &'a str) -> Self {
        Part::Str(s)
    }
}

impl From<u64> for Part<'_> {
    fn from(v: u64) -> Self {
        Part::U64(v)
    }
}

impl From<usize> for Part<'_> {
    fn from(v: usize) -> Self {
        Part::U64(v as u64)
    }
}

pub fn derive(parts: &[Part<'_>]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        match p {
            Part::Str(s) => {
                h.update([0u8]);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            Part::U64(v) => {
                h.update([1u8]);
                h.update(v.to_le_bytes());
            }
        }
    }
    h.finalize().into()
}

pub fn rng(parts: &[Part<'_>]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive(parts))
}
