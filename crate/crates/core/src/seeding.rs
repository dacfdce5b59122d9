//! Deterministic per-token random generators.
//!
//! Every random draw in the simulator comes from a generator derived from the
//! global seed and one token (a study id for tie-breaking, an applicant id for
//! the forced-linear transform): the 64-bit FNV-1a hash of the token, XORed with
//! the global seed, seeds a 128-bit multiplicative congruential generator
//! (`Pcg64Mcg`). Results therefore do not depend on iteration order.

use std::hash::Hasher;

use fnv::FnvHasher;
use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

pub type TokenRng = Pcg64Mcg;

pub fn fnv1a64(token: &str) -> u64 {
    let mut hasher = FnvHasher::default();
    hasher.write(token.as_bytes());
    hasher.finish()
}

pub fn token_rng(seed: u64, token: &str) -> TokenRng {
    Pcg64Mcg::seed_from_u64(fnv1a64(token) ^ seed)
}
