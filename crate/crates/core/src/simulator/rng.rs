//! Derived random streams.
//!
//! Every (replicate, mode) pair owns an independent ChaCha8 stream. Stream
//! keys come from the SplitMix64 finalizer:
//!
//! ```text
//! splitmix64(x): x += 0x9E3779B97F4A7C15
//!                x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
//!                x = (x ^ (x >> 27)) * 0x94D049BB133111EB
//!                return x ^ (x >> 31)
//! derive(key, index) = splitmix64(key ^ splitmix64(index + 0x632BE59BD9B4E019))
//! ```
//!
//! The 32-byte ChaCha key of a stream is `splitmix64(k + w * 0x9E3779B97F4A7C15)`
//! for `w = 0..4`, each written little-endian.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tag stored with every observation record.
pub const RNG_ALGO: &str = "chacha8-splitmix64-v1";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const INDEX_TWEAK: u64 = 0x632B_E59B_D9B4_E019;

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Child key for `index` under `key`.
#[inline]
pub fn derive(key: u64, index: u64) -> u64 {
    splitmix64(key ^ splitmix64(index.wrapping_add(INDEX_TWEAK)))
}

/// Seed of replicate `replicate` under a master seed.
pub fn replicate_seed(master: u64, replicate: u64) -> u64 {
    derive(master, replicate)
}

/// Generator for one mode of one record.
pub fn mode_stream(record_seed: u64, mode: usize) -> ChaCha8Rng {
    stream_from_key(derive(record_seed, mode as u64))
}

pub fn stream_from_key(key: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    for (w, chunk) in seed.chunks_exact_mut(8).enumerate() {
        let word = splitmix64(key.wrapping_add((w as u64).wrapping_mul(GOLDEN)));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn splitmix_reference_values() {
        // Published first outputs of SplitMix64 seeded with 0: the state is
        // advanced before mixing, which `splitmix64(k * GOLDEN)` reproduces.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(GOLDEN), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let mut a = mode_stream(7, 0);
        let mut b = mode_stream(7, 1);
        let mut c = mode_stream(7, 0);
        let (x, y, z) = (a.next_u64(), b.next_u64(), c.next_u64());
        assert_ne!(x, y);
        assert_eq!(x, z);
        assert_ne!(replicate_seed(1, 0), replicate_seed(1, 1));
    }
}
