//! 64-bit digests of run artifacts.
//!
//! The digest is FNV-1a over a fixed canonical byte encoding, chosen over
//! the standard library hasher because its output must be stable across
//! platforms and releases: digests are serialized into result records and
//! compared between runs.

use crate::types::{Confidence, EvidenceLevel, JudgeOutcome, Winner};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Incremental FNV-1a (64-bit).
#[derive(Debug, Clone)]
pub struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Self(FNV_OFFSET)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn write_u64(&mut self, x: u64) {
        self.write(&x.to_le_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

fn level_code(level: EvidenceLevel) -> u8 {
    match level {
        EvidenceLevel::E0 => 0,
        EvidenceLevel::E1 => 1,
        EvidenceLevel::E2 => 2,
    }
}

/// Digest of a pairwise-comparison transcript in application order.
///
/// Encoding per outcome: ids as little-endian u64, evidence level and
/// verdict as single bytes, `v` doubled into {0,1,2}, `w` in microunits,
/// then the token cost. Changing any field of any outcome changes the
/// digest.
pub fn transcript_digest(transcript: &[JudgeOutcome]) -> u64 {
    let mut h = Fnv1a::new();
    for o in transcript {
        h.write_u64(o.i as u64);
        h.write_u64(o.j as u64);
        h.write(&[level_code(o.level)]);
        h.write(&[match o.raw_verdict.winner {
            Winner::A => 0,
            Winner::B => 1,
            Winner::Tie => 2,
        }]);
        h.write(&[match o.raw_verdict.confidence {
            Confidence::High => 0,
            Confidence::Low => 1,
        }]);
        h.write(&[(o.v * 2.0).round() as u8]);
        h.write_u64((o.w * 1e6).round() as u64);
        h.write_u64(o.token_cost);
    }
    h.finish()
}

/// Digest of a pointwise rating sequence, in rating order.
pub fn ratings_digest(ratings: &[(usize, u8)]) -> u64 {
    let mut h = Fnv1a::new();
    for &(id, r) in ratings {
        h.write_u64(id as u64);
        h.write(&[r]);
    }
    h.finish()
}
