//! Deterministic randomness streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// A labelled sub-stream of `master`: `SHA-256(master || label_0 || label_1 ...)`
/// seeds a ChaCha20 generator, so adding a party never shifts another
/// party's stream.
pub fn derive_rng(master: u64, labels: &[&str]) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"byitfl");
    h.update(master.to_be_bytes());
    for l in labels {
        h.update((l.len() as u64).to_be_bytes());
        h.update(l.as_bytes());
    }
    ChaCha20Rng::from_seed(h.finalize().into())
}

/// Stream for party `id` in a given round and purpose.
pub fn party_rng(master: u64, id: usize, round: u64, purpose: &str) -> ChaCha20Rng {
    derive_rng(
        master,
        &[&format!("party{id}"), &format!("round{round}"), purpose],
    )
}

/// Derives a child seed, for handing a sub-seed to another component.
pub fn derive_seed(master: u64, labels: &[&str]) -> u64 {
    use rand::RngCore;
    derive_rng(master, labels).next_u64()
}
