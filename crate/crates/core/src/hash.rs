//! Seeded row hashing shared by every sketch.
//!
//! Each row gets its own 64-bit seed derived from the family seed with
//! splitmix64, and a key is hashed by multiplying it into the upper bits and
//! running the murmur3 64-bit finalizer over the result xor the row seed.
//! Outputs depend only on `(seed, row, key)`, so they are stable across runs,
//! processes and platforms.

use strength_reduce::StrengthReducedU64;

use crate::error::{Error, Result};
use crate::trace::FlowKey;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// A family of `row_count` independently seeded hash functions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashFamily {
    seed: u64,
    row_seeds: Box<[u64]>,
}

impl HashFamily {
    pub fn new(seed: u64, row_count: usize) -> Result<Self> {
        if row_count == 0 {
            return Err(Error::param("row_count", "must be positive"));
        }
        let mut state = seed;
        let row_seeds = (0..row_count).map(|_| splitmix64(&mut state)).collect();
        Ok(Self { seed, row_seeds })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row_count(&self) -> usize {
        self.row_seeds.len()
    }

    /// Full 64-bit hash of `key` under `row`.
    ///
    /// Panics if `row` is out of range; use [`HashFamily::hash`] for a
    /// checked variant.
    #[inline]
    pub fn hash64(&self, row: usize, key: FlowKey) -> u64 {
        fmix64(self.row_seeds[row] ^ u64::from(key.get()).wrapping_mul(GOLDEN_GAMMA))
    }

    /// Index of `key` in `[0, range)` for `row`, by modulo of the 64-bit hash.
    #[inline]
    pub fn index(&self, row: usize, key: FlowKey, range: usize) -> usize {
        debug_assert!(range > 0);
        (self.hash64(row, key) % range as u64) as usize
    }

    /// Same as [`HashFamily::index`] with a precomputed divisor.
    #[inline]
    pub fn index_in(&self, row: usize, key: FlowKey, range: &Modulus) -> usize {
        range.reduce(self.hash64(row, key))
    }

    /// Checked form of [`HashFamily::index`].
    pub fn hash(&self, row: usize, key: FlowKey, range: usize) -> Result<usize> {
        if row >= self.row_count() {
            return Err(Error::param(
                "row",
                format!("row {row} out of range for {} rows", self.row_count()),
            ));
        }
        if range == 0 {
            return Err(Error::param("range", "must be positive"));
        }
        Ok(self.index(row, key, range))
    }
}

#[inline]
pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A fixed nonzero index range whose modulo avoids a hardware divide.
#[derive(Clone, Copy)]
pub struct Modulus(StrengthReducedU64);

impl Modulus {
    /// Panics if `range` is zero.
    pub fn new(range: usize) -> Self {
        Self(StrengthReducedU64::new(range as u64))
    }

    pub fn get(&self) -> usize {
        self.0.get() as usize
    }

    #[inline]
    pub fn reduce(&self, hash: u64) -> usize {
        (hash % self.0) as usize
    }
}

impl std::fmt::Debug for Modulus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("Modulus").field(&self.get()).finish()
    }
}

#[inline]
fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^ (k >> 33)
}
