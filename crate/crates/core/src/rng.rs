//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, purpose, stream id, counter)`: the seed
//! and purpose select a ChaCha key, the stream id selects the ChaCha stream and
//! the counter jumps to a fixed block offset inside it. Draws therefore do not
//! depend on the order in which they are requested, or on which thread
//! requests them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 32-bit words reserved per counter value (16 ChaCha blocks).
const WORDS_PER_SLOT: u128 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    InitialPosition = 1,
    Noise = 2,
    VisitOrder = 3,
    Sampling = 4,
}

/// Generator positioned at `(seed, purpose, stream, counter)`.
pub fn stream(seed: u64, purpose: Purpose, stream: u64, counter: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8] = purpose as u8;
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng.set_word_pos(counter as u128 * WORDS_PER_SLOT);
    rng
}
