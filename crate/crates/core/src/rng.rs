//! Keyed random streams.
//!
//! Every stochastic loop in the crate derives its generator from a
//! [`StreamSeed`] and the loop index (node, trajectory or time index). Results
//! therefore do not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream labels used by the estimators in this crate.
pub mod tag {
    pub const BACKSTEP: u64 = 0x6261_636b;
    pub const FORWARD: u64 = 0x666f_7277;
    pub const COST: u64 = 0x636f_7374;
    pub const FULL_HORIZON: u64 = 0x6675_6c6c;
    pub const RESTART: u64 = 0x7273_7472;
    pub const PROBE: u64 = 0x7072_6f62;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed(u64);

impl StreamSeed {
    pub fn new(master: u64) -> Self {
        StreamSeed(splitmix64(master))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// A child seed; distinct keys give statistically independent streams.
    pub fn derive(self, key: u64) -> Self {
        StreamSeed(splitmix64(
            self.0 ^ splitmix64(key.wrapping_add(0x5851_f42d_4c95_7f2d)),
        ))
    }

    /// The generator for loop index `index` under this seed.
    pub fn rng(self, index: u64) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }
}
