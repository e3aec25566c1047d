//! Counter-based deterministic random streams.
//!
//! Every variate is a pure function of a 64-bit stream key and a time index,
//! so two walks that share a key read identical values no matter which thread
//! generates them or in which order.

use statrs::function::erf::erfc_inv;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one key.
pub fn derive_key(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &p| mix64(acc ^ mix64(p.wrapping_add(GOLDEN))))
}

/// FNV-1a; stable across platforms and compiler versions.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self { key }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    #[inline]
    pub fn bits(&self, index: u64) -> u64 {
        let x = mix64(self.key ^ index.wrapping_add(1).wrapping_mul(GOLDEN));
        mix64(x ^ self.key.rotate_left(29))
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn uniform(&self, index: u64) -> f64 {
        ((self.bits(index) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate by inverse CDF.
    #[inline]
    pub fn normal(&self, index: u64) -> f64 {
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * self.uniform(index))
    }

    /// Uniform integer in `0..n`.
    #[inline]
    pub fn below(&self, index: u64, n: u64) -> u64 {
        ((u128::from(self.bits(index)) * u128::from(n)) >> 64) as u64
    }

    /// Fisher-Yates shuffle driven by consecutive indices starting at `offset`.
    pub fn shuffle<X>(&self, items: &mut [X], offset: u64) {
        for i in (1..items.len()).rev() {
            let j = self.below(offset + i as u64, i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
