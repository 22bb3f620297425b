//! Seed plumbing. Every random stream in the crate is a ChaCha8 generator
//! seeded from the run seed plus a stream tag, so results never depend on
//! evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, tag: u64) -> u64 {
    mix(base ^ mix(tag))
}

/// Tag from a short ASCII label, e.g. `stream_tag(b"dropout")`.
pub fn stream_tag(label: &[u8]) -> u64 {
    label
        .iter()
        .fold(0xCBF2_9CE4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x100_0000_01B3))
}

pub fn seeded(base: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tag))
}
