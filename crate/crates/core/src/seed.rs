//! Seed derivation shared by every randomized component.
//!
//! Ensemble members, shuffles and per-project generators each get their own
//! stream derived from the user seed and a member index, so results do not
//! depend on scheduling order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `seed ⊕ mix(index)`. The index is mixed first so that `(s, i)` and
/// `(s ^ 1, i ^ 1)` do not collide.
pub fn derive(seed: u64, index: u64) -> u64 {
    seed ^ splitmix64(index)
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn derived_rng(seed: u64, index: u64) -> Rng {
    rng(derive(seed, index))
}
