//! Seeded, splittable random number streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed and positioned
//! on one of its 2^64 independent streams. Replicate workers each own a
//! stream, so results do not depend on scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            inner,
        }
    }

    /// Stream for replicate `index` of experiment block `block`.
    ///
    /// The block occupies the high 32 bits of the stream id, so blocks
    /// never share a stream with each other.
    pub fn replicate(seed: u64, block: u32, index: u32) -> Self {
        Self::new(seed, ((block as u64) << 32) | index as u64)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
