//! Deterministic seed derivation.
//!
//! Every random stream is a ChaCha8 generator seeded from
//! `SHA-256(master_seed || label || indices)`. Streams depend only on their
//! labels, so adding or removing an experiment never perturbs another one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

pub fn derive_seed(master: u64, label: &str, indices: &[u64]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    for i in indices {
        hasher.update(i.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    seed
}

pub fn stream(master: u64, label: &str, indices: &[u64]) -> SimRng {
    ChaCha8Rng::from_seed(derive_seed(master, label, indices))
}

/// Stream for the large-scale layout of setup `setup`.
pub fn scenario_stream(master: u64, setup: usize) -> SimRng {
    stream(master, "scenario", &[setup as u64])
}

/// Stream for small-scale fading of coherence block `block` in setup `setup`.
pub fn block_stream(master: u64, setup: usize, block: usize) -> SimRng {
    stream(master, "block", &[setup as u64, block as u64])
}
