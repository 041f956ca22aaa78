//! Seeded, splittable random streams.
//!
//! Every consumer (a parameter's initializer, an epoch's shuffle, a synthetic
//! split) gets its own ChaCha stream derived from the run seed and a stream
//! id, so its draws never depend on how much another consumer has drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids below this are reserved for parameter initialization.
pub const PARAM_STREAMS: u64 = 1 << 32;
/// Base stream id for per-epoch shuffles.
pub const SHUFFLE_STREAMS: u64 = 2 << 32;
/// Base stream id for synthetic data generation.
pub const DATA_STREAMS: u64 = 3 << 32;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
