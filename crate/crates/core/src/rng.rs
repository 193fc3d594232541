//! Seed derivation. Every randomized operation draws from a ChaCha stream
//! keyed by a base seed plus a few tags (epoch, group, purpose), so results
//! depend only on the inputs and never on call order elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(seed: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, tags))
}

// Purpose tags.
pub(crate) const TAG_INIT: u64 = 1;
pub(crate) const TAG_SPLIT: u64 = 2;
pub(crate) const TAG_BATCH: u64 = 3;
pub(crate) const TAG_RESAMPLE: u64 = 4;
pub(crate) const TAG_SYNTH: u64 = 5;
