//! Named random streams derived from one per-run seed.
//!
//! Each consumer draws from its own ChaCha stream keyed by the run seed, so
//! adding a consumer never shifts the numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    InitWeights,
    Sampling,
    MonteCarlo,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::InitWeights => 1,
            Stream::Sampling => 2,
            Stream::MonteCarlo => 3,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
