use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Mixes a base seed with a stream index (splitmix64 finalizer) so that
/// per-learner and per-epoch generators are independent but reproducible.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Stream namespaces for derive_seed.
pub(crate) const STREAM_LEARNER: u64 = 1 << 32;
pub(crate) const STREAM_EPOCH: u64 = 2 << 32;
pub(crate) const STREAM_DATA: u64 = 3 << 32;
