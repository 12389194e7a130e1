//! Seed derivation for reproducible, order-independent randomness.
//!
//! Every random quantity is drawn from a ChaCha8 stream addressed by a
//! derived seed and a stream index, so parallel and serial runs consume
//! exactly the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Environment variable consulted by the CLI when `--seed` is absent.
pub const SEED_ENV: &str = "COMMSCALE_SEED";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `base`. Distinct part lists give unrelated seeds.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// A generator positioned at the start of stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
