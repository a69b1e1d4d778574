//! Deterministic random streams.
//!
//! Every random decision in a run draws from a stream keyed by the master seed
//! plus a purpose tag and coordinates (generation, slot, epoch, ...). Streams
//! never depend on scheduling order, so parallel training is reproducible and a
//! resumed run draws exactly what the uninterrupted run would have drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags. Distinct tags never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    InitIndividual = 1,
    Mutation = 2,
    EpochShuffle = 3,
    Probe = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with a purpose tag and coordinates into a 64-bit key.
pub fn derive_seed(master: u64, stream: Stream, coords: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(stream as u64));
    for &c in coords {
        h = splitmix64(h ^ splitmix64(c.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn stream(master: u64, stream: Stream, coords: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, stream, coords))
}
