//! Deterministic 64-bit generator used for all randomized behavior.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood's mix function): a
//! single 64-bit counter advanced by the golden-gamma constant, with the
//! output passed through two xor-multiply mixing rounds. It is fixed here,
//! constants and all, so that sample reports and synthetic corpora can be
//! reproduced bit-for-bit by any other implementation of the same stream.

/// SplitMix64 stream. `new(seed)` followed by repeated `next_u64()` yields,
/// for seed 0: `0xe220a8397b1dcdaf, 0x6e789e6aa1b965f4, 0x06c45d188009454f, ...`
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `0..bound` by modulo reduction (bound must be nonzero).
    /// The modulo bias is below 2^-32 for any bound under 2^32, which is far
    /// smaller than anything these corpus-scale draws can observe.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "next_below requires a nonzero bound");
        self.next_u64() % bound
    }

    /// Uniform f64 in [0, 1) from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// First `k` positions of a partial Fisher-Yates shuffle of `0..m`:
    /// a uniform sample of k distinct indices, order-sensitive, fully
    /// determined by the stream state.
    pub fn sample_indices(&mut self, m: usize, k: usize) -> Vec<usize> {
        let k = k.min(m);
        let mut pool: Vec<usize> = (0..m).collect();
        for i in 0..k {
            let j = i + self.next_below((m - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
