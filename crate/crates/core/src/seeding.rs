//! Independent, reproducible random streams derived from one 64-bit seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named sub-streams. Each consumer draws from its own stream so that adding
/// draws in one stage never perturbs another.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    ClassField = 1,
    Elevation = 2,
    Craters = 3,
    TraversabilityNoise = 4,
    Training = 5,
    Planner = 6,
}

/// A ChaCha8 generator keyed by `seed` and positioned on `stream`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed));
    rng.set_stream(stream as u64);
    rng
}

/// Seed used for regeneration attempt `attempt`; attempt 0 is `seed` itself.
pub fn attempt_seed(seed: u64, attempt: u64) -> u64 {
    if attempt == 0 {
        seed
    } else {
        splitmix(seed ^ splitmix(attempt))
    }
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
