//! Hierarchically keyed random streams.
//!
//! A single user seed governs every stochastic choice in the pipeline. Each
//! consumer derives its own independent ChaCha stream from `(seed, key path)`
//! so results never depend on the order in which streams are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domain tags.
pub mod tag {
    pub const SAMPLING: u64 = 0x5a4d_504c;
    pub const BUCKET_VECTORS: u64 = 0x4f42_5543;
    pub const STUB_EMBED: u64 = 0x5354_5542;
    pub const HIP_INIT: u64 = 0x4849_5049;
    pub const LM_INIT: u64 = 0x4c4d_494e;
    pub const DIAG: u64 = 0x4449_4147;
    pub const RELATIONS: u64 = 0x5245_4c53;
    pub const SHUFFLE: u64 = 0x5348_5546;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a key path into a 64-bit digest.
pub fn mix(seed: u64, path: &[u64]) -> u64 {
    let mut h = splitmix(seed ^ 0x6a09_e667_f3bc_c908);
    for (i, &k) in path.iter().enumerate() {
        h = splitmix(h ^ splitmix(k.wrapping_add((i as u64 + 1).wrapping_mul(0x9e37_79b9))));
    }
    h
}

/// Independent stream for `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    let mut h = mix(seed, path);
    for chunk in bytes.chunks_mut(8) {
        h = splitmix(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// FNV-1a over bytes, used to key streams by text.
pub fn hash_bytes(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
