//! Named, splittable random streams.
//!
//! Every random draw in the crate comes from a [`RngStream`] derived from one
//! master seed. A stream is identified by a path of labels (module, purpose)
//! and hands out independent ChaCha8 generators per batch index, so parallel
//! batches are reproducible regardless of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used throughout the crate.
pub type Rng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    key: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            key: splitmix64(master_seed),
        }
    }

    /// Child stream for a named purpose.
    pub fn child(&self, label: &str) -> Self {
        Self {
            key: splitmix64(self.key ^ fnv1a(label)),
        }
    }

    /// Child stream for an indexed purpose (seed replicate, bidder, item).
    pub fn index(&self, i: u64) -> Self {
        Self {
            key: splitmix64(self.key.rotate_left(17) ^ splitmix64(i.wrapping_add(1))),
        }
    }

    /// Generator for batch `b` of this stream.
    pub fn batch(&self, b: u64) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(b);
        rng
    }

    /// Single generator for sequential use.
    pub fn rng(&self) -> Rng {
        self.batch(u64::MAX)
    }
}
