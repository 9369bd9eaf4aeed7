//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, stream_id, row, col)`: the ChaCha key is
//! built from `(seed, stream_id)`, the ChaCha stream selects the row and the
//! word position selects the column. Each addressed slot owns exactly
//! [`WORDS_PER_SLOT`] 32-bit words, so a slot's value never depends on which
//! other slots were generated before it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Two `u64` draws per addressed slot.
pub const WORDS_PER_SLOT: u128 = 4;

/// Immutable `(seed, stream_id)` pair. Cheap to copy and share across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl SeededStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// A child stream, statistically independent of `self` and of siblings
    /// with a different `tag`.
    pub fn derive(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: mix64(self.stream_id ^ mix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    fn key(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream_id.to_le_bytes());
        key[16..24].copy_from_slice(b"nlspike\0");
        key
    }

    /// Reader positioned at slot `(row, col)`; successive [`SlotReader::next_slot`]
    /// calls walk `(row, col + 1)`, `(row, col + 2)`, ...
    pub fn reader(&self, row: u64, col: u64) -> SlotReader {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(row);
        rng.set_word_pos(u128::from(col) * WORDS_PER_SLOT);
        SlotReader { rng }
    }

    /// The two raw words of a single slot.
    pub fn slot(&self, row: u64, col: u64) -> (u64, u64) {
        self.reader(row, col).next_slot()
    }
}

pub struct SlotReader {
    rng: ChaCha8Rng,
}

impl SlotReader {
    #[inline]
    pub fn next_slot(&mut self) -> (u64, u64) {
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        (a, b)
    }
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_open_right(w: u64) -> f64 {
    (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `(0, 1]`, safe as a logarithm argument.
#[inline]
pub fn unit_open_left(w: u64) -> f64 {
    ((w >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}
