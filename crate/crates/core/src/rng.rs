//! Seeded, splittable random streams.
//!
//! Every stochastic routine draws from a [`ChaCha8Rng`] keyed by the user seed
//! and positioned on a 64-bit stream id. ChaCha streams sharing a key produce
//! disjoint keystreams, so two substreams with different ids never overlap.
//! Stream ids are composed from a purpose tag (which estimator is drawing) and
//! a chunk index, which keeps results independent of how chunks are scheduled
//! across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Trials per chunk. Each chunk owns one substream.
pub const CHUNK_TRIALS: usize = 1 << 14;

/// What a substream is used for. Distinct purposes never share a stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Purpose {
    Link = 1,
    Detection = 2,
    SelectedGain = 3,
    FadingContext = 4,
    Scratch = 5,
}

pub fn stream_id(purpose: Purpose, chunk: u64) -> u64 {
    ((purpose as u64) << 40) | (chunk & ((1 << 40) - 1))
}

/// Generator for substream `(seed, stream)`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn chunk_rng(seed: u64, purpose: Purpose, chunk: u64) -> ChaCha8Rng {
    substream(seed, stream_id(purpose, chunk))
}

/// Split `trials` into `(chunk_index, len)` pieces of [`CHUNK_TRIALS`]; the
/// last piece may be shorter.
pub fn chunks(trials: usize) -> Vec<(u64, usize)> {
    (0..trials.div_ceil(CHUNK_TRIALS))
        .map(|c| {
            let start = c * CHUNK_TRIALS;
            (c as u64, CHUNK_TRIALS.min(trials - start))
        })
        .collect()
}
