//! Deterministic seed derivation.
//!
//! Every random choice in the crate flows from a user seed through these
//! mixers, so results are reproducible across runs, platforms, and thread
//! schedules. The std hasher is unstable across releases, hence FNV-1a for
//! string tags and splitmix64 for mixing.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub fn fnv1a(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Mixes a salt into a seed; `mix(mix(s, a), b)` differs from `mix(mix(s, b), a)`.
pub fn mix(seed: u64, salt: u64) -> u64 {
    splitmix64(seed.rotate_left(17) ^ splitmix64(salt))
}

pub fn mix_str(seed: u64, tag: &str) -> u64 {
    mix(seed, fnv1a(tag))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixing_is_order_sensitive() {
        let s = 42;
        assert_ne!(mix(mix(s, 1), 2), mix(mix(s, 2), 1));
        assert_ne!(mix(s, 1), mix(s, 2));
    }

    #[test]
    fn string_tags_are_stable() {
        // Frozen values: changing them silently would break stored seeds.
        assert_eq!(fnv1a(""), 0xcbf29ce484222325);
        assert_eq!(fnv1a("a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn rng_streams_differ() {
        use rand::Rng;
        let mut a = rng(mix(7, 0));
        let mut b = rng(mix(7, 1));
        let xa: u64 = a.random();
        let xb: u64 = b.random();
        assert_ne!(xa, xb);
    }
}
