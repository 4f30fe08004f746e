//! Per-run seed derivation.
//!
//! ```text
//! mix(x)  = splitmix64 finalizer:
//!           x += 0x9E3779B97F4A7C15
//!           x  = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
//!           x  = (x ^ (x >> 27)) * 0x94D049BB133111EB
//!           x ^ (x >> 31)
//! seed_for(master, cell, agent) = mix(mix(master) ^ mix((cell << 32) | agent))
//! ```
//!
//! `mix` is a bijection on `u64`, so for `cell, agent < 2^32` distinct
//! tuples map to distinct seeds and any change of `master` changes every
//! derived seed. All arithmetic wraps.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

/// The run-level generator.
pub type RunRng = Xoshiro256StarStar;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn seed_for(master: u64, cell: u32, agent: u32) -> u64 {
    let index = ((cell as u64) << 32) | agent as u64;
    splitmix64(splitmix64(master) ^ splitmix64(index))
}

pub fn rng_for(seed: u64) -> RunRng {
    RunRng::seed_from_u64(seed)
}
