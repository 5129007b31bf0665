//! Named random streams derived from a single root seed.
//!
//! Every stochastic component draws from its own ChaCha stream so that
//! changing, say, the sampler settings never perturbs weight initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Init,
    Shuffle,
    Folds,
    Dropout,
    Sampler,
    Synth,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Shuffle => 2,
            Stream::Folds => 3,
            Stream::Dropout => 4,
            Stream::Sampler => 5,
            Stream::Synth => 6,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}

/// A sub-stream for the `index`-th independent worker of a component
/// (sampler chains, fold jobs).
pub fn substream(seed: u64, which: Stream, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(which.id());
    rng
}
