//! Seed splitting.
//!
//! A single run seed expands into independent ChaCha8 streams, one per
//! purpose. The stream id is the ChaCha stream parameter, so two purposes
//! never share keystream even though they share the key.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose of a random stream derived from a run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Synthetic features, ground truth and response noise.
    Data,
    /// Random geometric point placement.
    Topology,
    /// Communication noise injected into exchanged messages.
    Noise,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Data => 0,
            Stream::Topology => 1,
            Stream::Noise => 2,
        }
    }
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
