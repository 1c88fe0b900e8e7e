//! Counter-keyed random draws.
//!
//! Every draw is addressed by `(seed, stream, counter)` on a ChaCha8 stream,
//! so a sequence's randomness does not depend on how many other sequences
//! share its batch.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Draw purposes, packed into the low bits of the counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    FirstHitting = 1,
    Token = 2,
}

fn keyed_u64(seed: u64, stream: u64, counter: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(counter) * 2);
    rng.next_u64()
}

/// Uniform draw in the open interval (0, 1).
pub fn keyed_uniform(seed: u64, stream: u64, counter: u64) -> f64 {
    let bits = keyed_u64(seed, stream, counter) >> 11;
    (bits as f64 + 0.5) / (1u64 << 53) as f64
}

/// Counter for a decoding draw at `(block, step)`.
pub fn decode_counter(block: usize, step: usize, purpose: Purpose) -> u64 {
    ((block as u64) << 40) | ((step as u64) << 8) | purpose as u64
}

/// Independent sub-seed for a labelled sub-task.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    keyed_u64(seed ^ 0x9e37_79b9_7f4a_7c15, tag, index)
}
