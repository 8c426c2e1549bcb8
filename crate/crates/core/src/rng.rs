//! Named random substreams.
//!
//! Every stochastic component draws from its own stream, seeded from a hash
//! of the root seed and a component name. Adding a component never shifts
//! the numbers seen by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn derive_seed(root: u64, name: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update((name.len() as u64).to_le_bytes());
    hasher.update(name.as_bytes());
    hasher.finalize().into()
}

pub fn substream(root: u64, name: &str) -> StreamRng {
    ChaCha8Rng::from_seed(derive_seed(root, name))
}

/// Substream for the `index`-th member of a family (SNR point, seed replica).
pub fn indexed_substream(root: u64, name: &str, index: usize) -> StreamRng {
    substream(root, &format!("{name}#{index}"))
}
