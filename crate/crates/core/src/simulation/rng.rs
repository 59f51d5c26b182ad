//! Counter-based random streams for the replication grid.
//!
//! Every replication draws from ChaCha20 with a 256-bit key built from
//! `(seed, Delta, domain tag)` and the replication index as the 64-bit stream
//! id. ChaCha20 is a counter-mode generator, so any `(seed, replication,
//! Delta)` cell can be regenerated on its own and in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const DATA_TAG: &[u8; 8] = b"dsdata01";
const FOLD_TAG: &[u8; 8] = b"dsfold01";

pub(crate) fn keyed(seed: u64, replication: u64, delta: f64, tag: &[u8; 8]) -> ChaCha20Rng {
    // -0.0 and 0.0 name the same grid cell
    let delta = if delta == 0.0 { 0.0 } else { delta };
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&delta.to_bits().to_le_bytes());
    key[16..24].copy_from_slice(tag);
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(replication);
    rng
}

/// Stream for the design, coefficients and noise of one replication.
pub fn data_rng(seed: u64, replication: u64, delta: f64) -> ChaCha20Rng {
    keyed(seed, replication, delta, DATA_TAG)
}

/// Seed for the cross-validation fold assignment of one replication.
pub fn fold_seed(seed: u64, replication: u64, delta: f64) -> u64 {
    use rand::RngCore;
    keyed(seed, replication, delta, FOLD_TAG).next_u64()
}
