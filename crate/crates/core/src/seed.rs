//! Deterministic per-chain random streams.
//!
//! Every chain draws from a ChaCha8 generator (the `rand_chacha` crate's
//! `ChaCha8Rng`: 8-round ChaCha with a 256-bit key, 64-bit stream id and
//! 64-bit block counter). The key for chain `i` of a run with master seed `s`
//! is
//!
//! ```text
//! SHA-256("latgauge/chain-seed/v1" || s as u64 little-endian || i as u64 little-endian)
//! ```
//!
//! and the stream id is 0. Any ChaCha8 implementation with the same key,
//! stream and word layout reproduces the streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SEED_DOMAIN: &[u8] = b"latgauge/chain-seed/v1";

/// The 32-byte ChaCha key of chain `chain_index` under `master_seed`.
pub fn derive_chain_seed(master_seed: u64, chain_index: u64) -> [u8; 32] {
    Sha256::new()
        .chain_update(SEED_DOMAIN)
        .chain_update(master_seed.to_le_bytes())
        .chain_update(chain_index.to_le_bytes())
        .finalize()
        .into()
}

pub fn chain_rng(master_seed: u64, chain_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_chain_seed(master_seed, chain_index))
}

/// A derived seed for auxiliary streams (boundary draws, trial inputs) that
/// must not collide with chain streams.
pub fn derive_aux_seed(master_seed: u64, label: &str, index: u64) -> [u8; 32] {
    Sha256::new()
        .chain_update(b"latgauge/aux-seed/v1")
        .chain_update((label.len() as u64).to_le_bytes())
        .chain_update(label.as_bytes())
        .chain_update(master_seed.to_le_bytes())
        .chain_update(index.to_le_bytes())
        .finalize()
        .into()
}

pub fn aux_rng(master_seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_aux_seed(master_seed, label, index))
}

/// Lower-case hex encoding.
pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Complete generator state: key, stream id and position in 32-bit words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}
