//! Stable text hashing used for cache keys and mock-embedding seeds.

use unicode_normalization::UnicodeNormalization;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// FNV-1a over the UTF-8 bytes of the NFC form of `text`.
pub fn text_hash(text: &str) -> u64 {
    fnv1a64(nfc(text).as_bytes())
}

/// Unicode scalar count after NFC.
pub fn char_len(text: &str) -> usize {
    text.nfc().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn hash_is_normalization_insensitive() {
        // "é" precomposed vs. "e" + combining acute
        assert_eq!(text_hash("caf\u{e9}"), text_hash("cafe\u{301}"));
        assert_eq!(char_len("cafe\u{301}"), 4);
    }
}
