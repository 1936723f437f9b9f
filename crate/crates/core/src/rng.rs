//! Seeded random streams.
//!
//! Every randomized step draws from ChaCha8 keyed by a 64-bit seed, with the
//! stream id selecting an independent sub-sequence (fold, repeat, tree). The
//! generator is fully specified and platform independent, so runs are
//! bit-reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream ids for the different consumers of a single seed.
pub mod stream {
    pub const FOLDS: u64 = 1;
    pub const SPLIT_BASE: u64 = 1 << 16;
    pub const FOREST_BASE: u64 = 1 << 32;
    pub const SYNTH: u64 = 7;
}

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
