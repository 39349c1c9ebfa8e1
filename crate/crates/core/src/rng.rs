//! Seeded random streams.
//!
//! Everything stochastic in this crate draws from a ChaCha12 stream seeded
//! through [`stream`], so a master seed plus a stream id reproduces any run
//! bit-for-bit regardless of thread count or platform. Stream ids are mixed
//! through SplitMix64, which is a bijection: distinct ids never collide for
//! a fixed master seed.

use rand_chacha::rand_core::SeedableRng;

/// The RNG used throughout the crate. ChaCha is value-stable across
/// releases, unlike `StdRng`.
pub type Rng = rand_chacha::ChaCha12Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from a master seed and a stream id.
pub fn derive(master: u64, stream_id: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream_id))
}

/// RNG seeded directly from `seed`.
pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// RNG for stream `stream_id` of `master`.
pub fn stream(master: u64, stream_id: u64) -> Rng {
    seeded(derive(master, stream_id))
}
