//! Derivation of independent RNG streams from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG type used everywhere in the crate.
pub type SimRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Mixes a master seed with a stream label and a path of counters.
pub fn derive_seed(master: u64, label: &str, path: &[u64]) -> u64 {
    let mut h = splitmix(master ^ fnv1a(label));
    for &p in path {
        h = splitmix(h ^ splitmix(p));
    }
    h
}

pub fn stream(master: u64, label: &str, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, label, path))
}
