//! Seedable, splittable 64-bit PRNG used by every randomized component.
//!
//! Algorithm: SplitMix64 (Vigna's finalizer). A stream's initial state is
//! `mix64(seed) ^ mix64(stream_id * 0xA24B_AED4_963E_E407 + 1)`, after which
//! each output advances the state by the golden-ratio increment and applies
//! the mix. Identical `(seed, stream_id)` pairs always produce identical
//! sequences; distinct stream ids give statistically independent streams.
//! Non-cryptographic.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_MULT: u64 = 0xA24B_AED4_963E_E407;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic 64-bit PRNG stream. Value-semantic: cloning forks the
/// sequence at the current position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    state: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let state = mix64(seed) ^ mix64(stream_id.wrapping_mul(STREAM_MULT).wrapping_add(1));
        RngStream { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform f64 in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64) / DEN
    }

    /// Uniform index in 0..n via multiply-shift (bias < n / 2^64).
    #[inline]
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        (((self.next_u64() as u128) * (n as u128)) >> 64) as u64
    }

    /// Uniform f64 in [lo, hi).
    #[inline]
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Derive an independent child stream from the current position.
    pub fn split(&mut self) -> RngStream {
        let seed = self.next_u64();
        let id = self.next_u64();
        RngStream::new(seed, id)
    }
}
