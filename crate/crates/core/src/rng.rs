//! Reproducible random streams for parallel Monte Carlo.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name of the generator family, recorded in reports.
pub const GENERATOR: &str = "ChaCha8";

/// Independent generator for `stream` under `seed`; the same pair always
/// yields the same sequence regardless of thread scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
