//! Seed derivation.
//!
//! Every random stream in the harness (split shuffles, parameter init,
//! per-epoch batch shuffles, dropout masks, synthetic pixels) is derived
//! from a recorded base seed through `derive_seed`, so a run is fully
//! reproducible from its config snapshot.

/// splitmix64 finalizer over `base` combined with a stream salt.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a hash, used to turn model names into stream salts.
pub fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
