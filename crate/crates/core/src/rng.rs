//! Seeded random streams.
//!
//! Every random draw in the toolkit comes from ChaCha20, a counter-based
//! generator whose output is identical across platforms. Independent
//! streams for parallel chunks or pipeline stages are obtained by selecting
//! a ChaCha stream id rather than by re-seeding.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type CorrRng = ChaCha20Rng;

/// Stream ids reserved for pipeline stages so one global seed can feed
/// every module without overlap.
pub mod stream {
    pub const SAMPLER: u64 = 1;
    pub const REJECTION: u64 = 2;
    pub const MARKET: u64 = 3;
    pub const DATASET: u64 = 4;
    pub const INIT: u64 = 5;
    pub const TRAIN: u64 = 6;
    pub const GENERATE: u64 = 7;
    pub const SERVICE: u64 = 8;
}

/// Generator for `(seed, stream)`.
pub fn seeded(seed: u64, stream: u64) -> CorrRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for chunk `chunk` of stage `stream`: the chunk index is mixed
/// into the high bits of the stream id.
pub fn chunked(seed: u64, stream: u64, chunk: u64) -> CorrRng {
    seeded(seed, stream | (chunk.wrapping_add(1) << 16))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = seeded(7, 1).random();
        let b: u64 = seeded(7, 1).random();
        let c: u64 = seeded(7, 2).random();
        let d: u64 = chunked(7, 1, 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
