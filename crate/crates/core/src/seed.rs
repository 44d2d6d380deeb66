//! Fixed derivation rules that fan a single user seed out into independent
//! random streams (per model, per pass, per epoch, per sample).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed keyed by `(base, index)`.
#[inline]
pub fn derive(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index.wrapping_mul(GOLDEN).rotate_left(17))
}

/// Seed used by model `index` of a bank. Single-model enhancement is the
/// `index == 0` case.
#[inline]
pub fn model_seed(base: u64, index: usize) -> u64 {
    derive(base ^ 0x6D6F_6465_6C00_0000, index as u64)
}

/// Independent ChaCha substream for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
