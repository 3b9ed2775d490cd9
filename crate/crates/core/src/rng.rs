//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha20 generator keyed by the
//! master seed. Independent tasks use distinct stream numbers of the same key:
//! stream `replicate * STREAMS_PER_REPLICATE + slot`, where slot 0 generates
//! the replicate's data and slot `1 + m` drives the chain of method `m`.
//! Single fits use stream 0.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type ChainRng = ChaCha20Rng;

pub const STREAMS_PER_REPLICATE: u64 = 1 << 16;

pub fn stream(seed: u64, stream_id: u64) -> ChainRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

pub fn replicate_stream(seed: u64, replicate: u64, slot: u64) -> ChainRng {
    stream(seed, replicate * STREAMS_PER_REPLICATE + slot)
}
