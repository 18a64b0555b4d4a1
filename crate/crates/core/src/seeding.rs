//! Seed derivation.
//!
//! Every random stream in the pipeline is a `ChaCha8Rng` whose seed is derived
//! from the master seed and a path of integer labels:
//!
//! ```text
//! s_0     = master
//! s_{k+1} = splitmix64(s_k ^ splitmix64(label_k + 0x9E3779B97F4A7C15 * (k + 1)))
//! ```
//!
//! The 64-bit result seeds the generator through `SeedableRng::seed_from_u64`.
//! Labels for the top-level domains are the `stream::*` constants below; nested
//! labels are plain indices (environment index, episode index, ...).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod stream {
    pub const ENV: u64 = 1;
    pub const POLICY_SAMPLING: u64 = 2;
    pub const ADVANTAGE_NOISE: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const INIT: u64 = 5;
    pub const DEMOS: u64 = 6;
    pub const ENCODER: u64 = 7;
    pub const HUMAN_POLICY: u64 = 8;
    pub const EVAL: u64 = 9;
    pub const RENDER: u64 = 10;
    pub const EXPORT: u64 = 11;
    pub const DATASET_SPLIT: u64 = 12;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().enumerate().fold(master, |s, (k, &label)| {
        let salt = splitmix64(label.wrapping_add(GOLDEN.wrapping_mul(k as u64 + 1)));
        splitmix64(s ^ salt)
    })
}

pub fn rng_for(master: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, path))
}
