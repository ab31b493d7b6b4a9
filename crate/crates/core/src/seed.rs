//! Stable seed derivation for keyed random streams.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a list of string keys.
///
/// Keys are hashed with FNV-1a (length-prefixed, so `["ab", "c"]` and
/// `["a", "bc"]` differ) and folded into the parent with [`mix64`]. The
/// result depends only on the inputs, never on process or platform.
pub fn derive(parent: u64, keys: &[&str]) -> u64 {
    let mut h = mix64(parent);
    for key in keys {
        let mut f: u64 = 0xcbf2_9ce4_8422_2325;
        for b in (key.len() as u64).to_le_bytes().iter().chain(key.as_bytes()) {
            f ^= *b as u64;
            f = f.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h = mix64(h ^ f);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_key_sensitive() {
        assert_eq!(derive(1, &["scene", "a"]), derive(1, &["scene", "a"]));
        assert_ne!(derive(1, &["scene", "a"]), derive(2, &["scene", "a"]));
        assert_ne!(derive(1, &["ab", "c"]), derive(1, &["a", "bc"]));
        // pinned so accidental changes to the derivation are caught
        assert_eq!(mix64(0), 0xe220_a839_7b1d_cdaf);
    }
}
