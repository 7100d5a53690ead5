//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by the master seed and selected
//! by a 64-bit stream id. Replica `r` of an experiment uses stream id `r`;
//! auxiliary consumers (bootstrap resampling) use ids with the top bit set.
//! Because a stream is a pure function of `(master_seed, stream_id)`, results
//! never depend on which worker thread ran which replica.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AUXILIARY_BIT: u64 = 1 << 63;

#[derive(Clone, Debug)]
pub struct RandomStream {
    inner: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        inner.set_word_pos(0);
        Self { inner }
    }

    /// Stream driving the noise of replica `replica_id`.
    pub fn for_replica(master_seed: u64, replica_id: u64) -> Self {
        Self::new(master_seed, replica_id & !AUXILIARY_BIT)
    }

    /// Stream reserved for non-replica consumers, disjoint from every replica stream.
    pub fn auxiliary(master_seed: u64, tag: u64) -> Self {
        Self::new(master_seed, tag | AUXILIARY_BIT)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
