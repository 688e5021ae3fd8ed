//! Counter-based random streams.
//!
//! Every random draw in the toolkit comes from a ChaCha8 keystream keyed by
//! `seed` and addressed by a `stream` number (repeat index, video index, row
//! index...). Streams are independent of each other and of the order in
//! which they are consumed, so results do not depend on thread scheduling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Two-level addressing: `(seed, domain, index)`. Domains keep unrelated
/// uses of the same user seed from sharing keystreams.
pub fn substream(seed: u64, domain: u32, index: u64) -> ChaCha8Rng {
    stream(seed, ((domain as u64) << 48) ^ index)
}

pub fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    items.shuffle(rng);
}

pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub(crate) mod domain {
    pub const HALF_SPLIT: u32 = 1;
    pub const VIDEO_ORDER: u32 = 2;
    pub const SCENARIO: u32 = 3;
    pub const MEMORIZE: u32 = 4;
    pub const STUDY: u32 = 5;
}
