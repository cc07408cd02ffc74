//! 64-bit avalanche mixing used for counter-based pseudo-randomness and
//! for stable content hashes.
//!
//! Everything downstream (instance realization, Monte Carlo sampling,
//! observation digests) derives its randomness by mixing plain integers,
//! so results are a pure function of the seeds involved and independent
//! of evaluation order or threading.

/// SplitMix64 finalizer. Bijective on `u64` with full avalanche.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combine a running state with one more word, avalanching the result.
#[inline]
pub fn mix_with(state: u64, word: u64) -> u64 {
    mix64(state ^ word.wrapping_mul(0xff51_afd7_ed55_8ccd))
}

/// Map a mixed word to a double in `[0, 1)` using the top 53 bits.
#[inline]
pub fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// FNV-1a over a byte slice; used for deterministic content hashes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// FNV-1a over a stream of `u64` words (little-endian byte order).
pub struct WordHasher {
    state: u64,
}

impl WordHasher {
    pub fn new() -> Self {
        Self {
            state: 0xcbf2_9ce4_8422_2325,
        }
    }

    pub fn write_u64(&mut self, word: u64) {
        for b in word.to_le_bytes() {
            self.state ^= b as u64;
            self.state = self.state.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.state
    }
}

impl Default for WordHasher {
    fn default() -> Self {
        Self::new()
    }
}
