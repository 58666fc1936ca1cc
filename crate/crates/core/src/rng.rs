//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] whose seed is
//! derived from one global seed. Sub-streams are split off with
//! [`derive_seed`], which mixes a parent seed with a list of coordinates so
//! that, for example, every grid cell owns an independent and reproducible
//! stream.

pub use rand_chacha::ChaCha8Rng as Rng;
use rand::SeedableRng;

/// Builds the crate's generator from a 64-bit seed.
pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `parent` with `parts` into a new seed. Stable across platforms and
/// toolchain versions.
pub fn derive_seed(parent: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(parent), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Hashes a short label (e.g. `"data"`) into a seed component.
pub fn tag(label: &str) -> u64 {
    // FNV-1a
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn derived_seeds_differ_by_coordinate() {
        let a = derive_seed(7, &[0, 1]);
        let b = derive_seed(7, &[1, 0]);
        let c = derive_seed(8, &[0, 1]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, &[0, 1]));
    }

    #[test]
    fn seeded_stream_is_reproducible() {
        let x: Vec<u32> = seeded(3).random_iter().take(4).collect();
        let y: Vec<u32> = seeded(3).random_iter().take(4).collect();
        assert_eq!(x, y);
    }
}
