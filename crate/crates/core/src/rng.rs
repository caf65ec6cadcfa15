//! Seeded random streams.
//!
//! Every stochastic routine takes a generic `Rng`; the helpers here build the
//! concrete generator used by the sampler, the simulators and the command
//! line. ChaCha8 is used because its output is fixed across platforms and
//! crate versions, and its 64-bit stream id gives independent substreams for
//! parallel replicates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent substream `stream` of the master `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Substream keyed by a two-level id, e.g. (scenario, replicate).
pub fn substream2(seed: u64, outer: u32, inner: u32) -> SimRng {
    substream(seed, (u64::from(outer) << 32) | u64::from(inner))
}
