//! Deterministic seed derivation.
//!
//! A master seed is split into independent per-purpose streams keyed by a
//! purpose tag plus an id path (grid indices, trial index, ...). Derivation is
//! a SplitMix64 chain over the inputs, so streams are order-insensitive:
//! a trial's generators do not depend on how work was scheduled.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a derived stream is used for. Distinct purposes with equal id paths
/// yield unrelated streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Data,
    Labels,
    Weights,
    TestPoints,
    Shuffle,
    NuEstimate,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Data => 0x9e37_79b9_0000_0001,
            Purpose::Labels => 0x9e37_79b9_0000_0002,
            Purpose::Weights => 0x9e37_79b9_0000_0003,
            Purpose::TestPoints => 0x9e37_79b9_0000_0004,
            Purpose::Shuffle => 0x9e37_79b9_0000_0005,
            Purpose::NuEstimate => 0x9e37_79b9_0000_0006,
        }
    }
}

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `(master, purpose, ids...)`.
pub fn derive_seed(master: u64, purpose: Purpose, ids: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ purpose.tag());
    for &id in ids {
        h = splitmix64(h ^ splitmix64(id.wrapping_add(0x243f_6a88_85a3_08d3)));
    }
    h
}

/// Generator for a derived stream.
pub fn stream(master: u64, purpose: Purpose, ids: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, purpose, ids))
}
