//! Counter-based seed derivation.
//!
//! Every random stream in a run is keyed by the master seed plus a path of
//! integer tags (realization index, trajectory index, purpose), so results do
//! not depend on evaluation order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix(master);
    for &t in tags {
        s = splitmix(s ^ splitmix(t.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    s
}

pub fn stream(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}

/// Purpose tags used when deriving streams.
pub mod tag {
    pub const POSITIONS: u64 = 1;
    pub const REMOVAL: u64 = 2;
    pub const MEMBERS: u64 = 3;
    pub const REALIZATION: u64 = 4;
    pub const TWIST: u64 = 5;
}
