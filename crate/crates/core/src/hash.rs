//! Seedable 64-bit key hashing.
//!
//! FNV-1a over the key bytes followed by the SplitMix64 finalizer. The
//! algorithm is fixed so that partition and proxy-group assignments are
//! reproducible across runs and platforms.

/// Default seed used by topologies that do not override it.
pub const DEFAULT_HASH_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes arbitrary bytes under `seed`.
pub fn hash_bytes(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ mix64(seed);
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    mix64(h)
}

/// Hashes a numeric key id (little-endian bytes).
#[inline]
pub fn hash_u64(seed: u64, key: u64) -> u64 {
    hash_bytes(seed, &key.to_le_bytes())
}

/// Maps a 64-bit hash onto `buckets` equal slices of the hash space.
///
/// Bucket `i` owns `[ceil(i * 2^64 / n), ceil((i + 1) * 2^64 / n))`, so the
/// mapping is `floor(hash * n / 2^64)`.
#[inline]
pub fn bucket_of(hash: u64, buckets: u32) -> u32 {
    debug_assert!(buckets > 0);
    ((u128::from(hash) * u128::from(buckets)) >> 64) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_seed_sensitive() {
        assert_eq!(hash_u64(1, 42), hash_u64(1, 42));
        assert_ne!(hash_u64(1, 42), hash_u64(2, 42));
        assert_ne!(hash_u64(1, 42), hash_u64(1, 43));
    }

    #[test]
    fn bucket_edges() {
        assert_eq!(bucket_of(0, 4), 0);
        assert_eq!(bucket_of(u64::MAX, 4), 3);
        assert_eq!(bucket_of(1 << 63, 2), 1);
        assert_eq!(bucket_of((1 << 63) - 1, 2), 0);
        assert_eq!(bucket_of(u64::MAX, 1), 0);
    }
}
