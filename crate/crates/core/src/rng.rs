//! Counter-based random substreams.
//!
//! Every random quantity in a run is addressed by `(master seed, purpose,
//! stream, block)`. The purpose selects a ChaCha key, the stream is the
//! ChaCha stream id (the trial index) and the block is a position inside the
//! keystream. Draws therefore never depend on scheduling or on how many
//! values some other consumer pulled before.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Number of 32-bit keystream words reserved for one block.
const WORDS_PER_BLOCK: u128 = 256;

/// What a substream is used for. Each purpose gets an independent key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    NodePositions,
    AnchorPositions,
    RangingNoise,
    Free(u64),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::NodePositions => 0x6e6f_6465,
            Purpose::AnchorPositions => 0x616e_6368,
            Purpose::RangingNoise => 0x6e6f_6973,
            Purpose::Free(x) => 0xf7ee_0000_0000_0000 ^ x,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_key(seed: u64, purpose: Purpose) -> [u8; 32] {
    let mut state = seed ^ purpose.tag().rotate_left(29);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Seeded generator handed to every sampling operation.
#[derive(Debug, Clone)]
pub struct SeededRng(ChaCha8Rng);

impl SeededRng {
    /// Plain generator for ad hoc use (tests, tools).
    pub fn from_seed(seed: u64) -> Self {
        SeededRng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Substream `stream` of `purpose` under `seed`, positioned at block 0.
    pub fn substream(seed: u64, purpose: Purpose, stream: u64) -> Self {
        Self::at(seed, purpose, stream, 0)
    }

    /// Substream positioned at `block`; distinct blocks never overlap as
    /// long as each consumes fewer than 128 `u64`s.
    pub fn at(seed: u64, purpose: Purpose, stream: u64, block: u64) -> Self {
        let mut rng = ChaCha8Rng::from_seed(derive_key(seed, purpose));
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(block) * WORDS_PER_BLOCK);
        SeededRng(rng)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}
