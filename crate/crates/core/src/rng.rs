//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] keyed by the
//! user seed and positioned on a stream selected by a [`StreamId`]:
//!
//! ```text
//! key    = ChaCha8Rng::seed_from_u64(seed)      (PCG32 expansion of the seed)
//! stream = experiment << 32 | replication       (both must fit in 32 bits)
//! ```
//!
//! ChaCha is counter based, so a stream is a pure function of
//! `(seed, experiment, replication)` and replications can be evaluated on
//! any number of threads without changing a single output bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies one independent random stream below a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct StreamId {
    pub experiment: u32,
    pub replication: u32,
}

impl StreamId {
    pub const fn new(experiment: u32, replication: u32) -> Self {
        Self {
            experiment,
            replication,
        }
    }

    pub const fn as_u64(self) -> u64 {
        ((self.experiment as u64) << 32) | self.replication as u64
    }
}

/// Builds the generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: StreamId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.as_u64());
    rng
}
