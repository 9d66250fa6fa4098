//! Seeded, splittable random streams.
//!
//! Every sampling routine takes a [`Streams`] handle and reserves a stream id
//! from it. Batches inside a routine derive their generator from
//! `(seed, stream id, batch index)` only, so results never depend on thread
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Streams {
    seed: u64,
    next: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { seed, next: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Reserves a fresh stream id.
    pub fn reserve(&mut self) -> StreamId {
        let id = self.next;
        self.next += 1;
        StreamId { seed: self.seed, id }
    }

    /// Convenience: a generator on a freshly reserved stream.
    pub fn rng(&mut self) -> Rng {
        self.reserve().batch(0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StreamId {
    seed: u64,
    id: u64,
}

impl StreamId {
    pub fn batch(&self, index: u64) -> Rng {
        let mut rng = Rng::seed_from_u64(splitmix(self.seed ^ splitmix(self.id.wrapping_add(1))));
        rng.set_stream(index);
        rng
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
