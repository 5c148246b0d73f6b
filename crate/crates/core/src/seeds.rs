//! Deterministic seed derivation so that parallel and sequential runs consume
//! identical random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `index` under `tag`.
pub fn derive(master: u64, tag: u64, index: u64) -> u64 {
    splitmix(splitmix(master ^ splitmix(tag)).wrapping_add(index))
}

pub fn rng_from(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn child(master: u64, tag: u64, index: u64) -> Rng {
    rng_from(derive(master, tag, index))
}

pub mod tags {
    pub const NODE: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const REP: u64 = 3;
    pub const GRID: u64 = 4;
    pub const TIE: u64 = 5;
    pub const DATA: u64 = 6;
    pub const GRAPH: u64 = 7;
    pub const AGG: u64 = 8;
}
