//! Deterministic random streams.
//!
//! Every generator in the crate is a `ChaCha8Rng` seeded from a 64-bit value.
//! Sub-streams (per column, per trial, per neuron) are derived by folding the
//! stream indices into the master seed with the SplitMix64 finalizer:
//!
//! ```text
//! s_0 = master
//! s_{k+1} = splitmix64(s_k ^ splitmix64(index_k + 0x9E3779B97F4A7C15))
//! ```
//!
//! Derived seeds depend only on the master seed and the index path, never on
//! the order in which streams are consumed, so parallel and sequential runs
//! produce identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold an index path into a master seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |s, &i| {
        splitmix64(s ^ splitmix64(i.wrapping_add(GOLDEN)))
    })
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Stable numeric tag for a string label, used to separate experiment streams.
pub fn tag(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01B3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, &[1, 2]).random();
        let b: u64 = stream(7, &[1, 2]).random();
        let c: u64 = stream(7, &[2, 1]).random();
        let d: u64 = stream(8, &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
