//! Deterministic random streams.
//!
//! Every random decision draws from a stream keyed by the run seed and a
//! small tuple of counters, so results never depend on thread scheduling and
//! a resumed run sees exactly the streams an uninterrupted run would.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream purposes. Distinct tags keep streams for different decisions apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    Train = 2,
    Exploit = 3,
    Explore = 4,
    Restart = 5,
    Baseline = 6,
    Bootstrap = 7,
    Fit = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a purpose and two counters into a 64-bit sub-seed.
pub fn derive_seed(seed: u64, purpose: Purpose, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ purpose as u64);
    h = splitmix64(h ^ a);
    splitmix64(h ^ b.rotate_left(17))
}

pub fn stream(seed: u64, purpose: Purpose, a: u64, b: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, purpose, a, b))
}
