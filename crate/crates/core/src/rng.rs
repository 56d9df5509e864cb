//! Counter-based per-path random streams.
//!
//! Every path owns a ChaCha8 stream selected by `(seed, domain, index)`, so results do
//! not depend on how paths are distributed over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream families, kept apart so that nested estimators never reuse noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Paths = 1,
    Flow = 2,
    Inner = 3,
    NodeChoice = 4,
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let key = seed ^ (domain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Stream for inner path `inner` of outer path `outer`.
pub fn nested_stream(seed: u64, outer: u64, inner: u64) -> ChaCha8Rng {
    let key = seed ^ (Domain::Inner as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ outer.rotate_left(32);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(inner);
    rng
}
