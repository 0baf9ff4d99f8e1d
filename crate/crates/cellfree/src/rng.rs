//! Deterministic random-stream derivation.
//!
//! Every random stage of an experiment (AP layout, shadowing, pilot
//! assignment, small-scale fading, ...) draws from its own ChaCha stream keyed
//! by `(master seed, stage, snapshot index, realization index)`. Work units
//! can therefore execute in any order — or in parallel on any number of
//! threads — and still produce bit-identical results, and enabling one stage
//! never shifts the draws seen by another.
//!
//! The key schedule is a fixed SplitMix64 chain (not `std`'s hasher, whose
//! output is not stable across releases), so a `(seed, stage, snapshot,
//! realization)` tuple maps to the same stream forever.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stages of an experiment. The discriminants feed the stream key;
/// renumbering them would silently resample every experiment, so variants are
/// append-only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// AP and user positions for one snapshot.
    Layout = 1,
    /// Shadow-fading draw for one snapshot.
    Shadowing = 2,
    /// Random pilot assignment for one snapshot.
    Pilots = 3,
    /// Random neighbor selection for the partial-MMSE "random" variant.
    PmmseRandomSelect = 4,
    /// Small-scale fading for one channel realization.
    SmallScale = 5,
    /// Pilot-phase receiver noise for one channel realization.
    PilotNoise = 6,
    /// Scratch streams for tests and auxiliary estimators.
    Aux = 7,
}

/// SplitMix64 step: mixes a 64-bit state into a well-distributed output.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the ChaCha stream for one work unit.
///
/// `realization` is 0 for per-snapshot stages (layout, shadowing, pilots);
/// per-realization stages pass the channel-realization index.
pub fn stream(master_seed: u64, stage: Stage, snapshot: u64, realization: u64) -> ChaCha8Rng {
    let mut state = master_seed;
    let mut key = [0u8; 32];
    // Chain the tuple into the state, then squeeze four words.
    let _ = splitmix64(&mut state);
    state ^= stage as u64;
    let _ = splitmix64(&mut state);
    state ^= snapshot;
    let _ = splitmix64(&mut state);
    state ^= realization;
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
