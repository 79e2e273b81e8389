//! Seeded, splittable randomness.
//!
//! Every consumer draws from its own ChaCha8 stream `(seed, stream)`. Streams
//! are counter addressable, so a draw at position `t` can be regenerated
//! without carrying generator state around.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream ids below this value are reserved for recalibrator buckets.
pub const RESERVED_BUCKET_STREAMS: u64 = 1 << 32;

/// Stream for outcome generators.
pub const OUTCOME_STREAM: u64 = RESERVED_BUCKET_STREAMS;
/// Stream for baseline forecasters.
pub const FORECAST_STREAM: u64 = RESERVED_BUCKET_STREAMS + 1;
/// Stream for covariate generators.
pub const FEATURE_STREAM: u64 = RESERVED_BUCKET_STREAMS + 2;

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw in [0, 1) at position `counter` of stream `(seed, stream)`.
pub fn counter_uniform(seed: u64, stream: u64, counter: u64) -> f64 {
    let mut rng = substream(seed, stream);
    // one u64 consumes two 32-bit words
    rng.set_word_pos(u128::from(counter) * 2);
    unit_f64(rng.next_u64())
}

pub(crate) fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
