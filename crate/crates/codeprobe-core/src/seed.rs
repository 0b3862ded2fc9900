//! Deterministic seed derivation for parallel-safe simulation trials.

/// Derive an independent child seed from a root seed and an index.
///
/// Uses the splitmix64 finalizer, so trial `i` gets the same stream whether
/// trials run sequentially or are fanned out over workers.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    let mut z = root
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
