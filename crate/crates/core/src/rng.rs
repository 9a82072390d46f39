//! Seeded random streams.
//!
//! Every stochastic stage takes an integer seed; independent stages of one
//! realization draw from distinct ChaCha streams of the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Noise = 1,
    PhaseNoise = 2,
    Jones = 3,
    Source = 4,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
