//! Counter-based SplitMix64.
//!
//! The `i`-th output of a stream is `mix(key + (i + 1) * GAMMA)`, where `mix`
//! is the SplitMix64 finalizer (Steele, Lea & Flood, 2014). Output depends
//! only on `(key, i)`, so results are identical on every platform and any
//! draw can be reproduced without replaying the stream.

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Stream constants used to split one seed into independent streams.
pub const STREAM_PRIMARY: u64 = 0x6a09_e667_f3bc_c909;
pub const STREAM_SECONDARY: u64 = 0xbb67_ae85_84ca_a73b;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Stream `stream` of `seed`. Distinct stream constants give streams
    /// whose keys are decorrelated by the finalizer.
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterRng {
            key: mix64(seed ^ mix64(stream)),
            counter: 0,
        }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` (Lemire's multiply-shift with rejection).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            let wide = x as u128 * bound as u128;
            if (wide as u64) >= threshold {
                return (wide >> 64) as u64;
            }
        }
    }
}
