//! Seed derivation. Every stream is `ChaCha8` keyed by
//! `SHA-256(master_le || label || index_le)`, so adding an agent never
//! reshuffles another agent's stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(master: u64, label: &str, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

pub fn stream(master: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(master, label, index))
}

pub fn agent_stream(master: u64, agent: usize) -> ChaCha8Rng {
    stream(master, "agent", agent as u64)
}

pub fn pairing_stream(master: u64, tick: u64) -> ChaCha8Rng {
    stream(master, "pairing", tick)
}
