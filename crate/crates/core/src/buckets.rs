//! Flat bucket storage for the heavy part of the Elastic sketches.
//!
//! A bucket of `c` cells is laid out as `c` key words, then `c` counter
//! words, then the bucket's negative-vote word:
//!
//! ```text
//!   word  0 ..  c      keys      (0 = empty cell)
//!   word  c .. 2c      counters
//!   word 2c            vote_minus
//! ```
//!
//! With the default 7 cells that is 15 words, padded to a 16-word stride so
//! every bucket occupies exactly one 64-byte cache line. Other cell counts
//! are packed with a stride of `2c + 1` words.
//!
//! Occupied cells always form a prefix of the bucket: cells are filled in
//! index order and are never emptied again.

use crate::error::{Error, Result};

pub(crate) const EMPTY_KEY: u32 = 0;

/// Cell count whose bucket is padded to one cache line.
pub const CACHE_LINE_CELLS: usize = 7;
const LINE_WORDS: usize = 16;

#[repr(C, align(64))]
#[derive(Clone, Copy, PartialEq, Eq)]
struct Line([u32; LINE_WORDS]);

/// Accounted size of one bucket in bytes.
pub fn bucket_footprint_bytes(cells_per_bucket: usize) -> usize {
    if cells_per_bucket == CACHE_LINE_CELLS {
        LINE_WORDS * 4
    } else {
        cells_per_bucket * 8 + 4
    }
}

#[derive(Clone, PartialEq, Eq)]
pub(crate) struct BucketArray {
    lines: Vec<Line>,
    cells: usize,
    stride: usize,
    count: usize,
    #[cfg(test)]
    log: AccessLog,
}

/// Bucket indices touched through the accessors, for tests.
#[cfg(test)]
#[derive(Clone, Default)]
struct AccessLog(std::cell::RefCell<Vec<usize>>);

#[cfg(test)]
impl PartialEq for AccessLog {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[cfg(test)]
impl Eq for AccessLog {}

pub(crate) struct BucketMut<'a> {
    pub keys: &'a mut [u32],
    pub counters: &'a mut [u32],
    pub vote_minus: &'a mut u32,
}

pub(crate) struct BucketRef<'a> {
    pub keys: &'a [u32],
    pub counters: &'a [u32],
    pub vote_minus: u32,
}

impl BucketArray {
    /// Allocates as many buckets as fit in `budget_bytes`.
    pub fn with_budget(budget_bytes: usize, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::param("cells_per_bucket", "must be positive"));
        }
        let footprint = bucket_footprint_bytes(cells);
        let count = budget_bytes / footprint;
        if count == 0 {
            return Err(Error::MemoryTooSmall {
                memory_bytes: budget_bytes,
                message: format!("one bucket of {cells} cells needs {footprint} bytes"),
            });
        }
        let stride = footprint / 4;
        let words = count * stride;
        Ok(Self {
            lines: vec![Line([0; LINE_WORDS]); words.div_ceil(LINE_WORDS)],
            cells,
            stride,
            count,
            #[cfg(test)]
            log: AccessLog::default(),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.cells
    }

    #[inline(always)]
    fn record(&self, _index: usize) {
        #[cfg(test)]
        self.log.0.borrow_mut().push(_index);
    }

    /// Drains the indices of buckets accessed since the last call.
    #[cfg(test)]
    pub fn take_accesses(&self) -> Vec<usize> {
        std::mem::take(&mut *self.log.0.borrow_mut())
    }

    #[inline]
    fn words(&self) -> &[u32] {
        // SAFETY: `Line` is `repr(C)` around `[u32; 16]` with no padding
        // (size 64, align 64), so the vector is a contiguous run of
        // `16 * len` initialized u32 words.
        unsafe {
            std::slice::from_raw_parts(
                self.lines.as_ptr().cast::<u32>(),
                self.lines.len() * LINE_WORDS,
            )
        }
    }

    #[inline]
    fn words_mut(&mut self) -> &mut [u32] {
        // SAFETY: see `words`; the exclusive borrow of `self` covers the slice.
        unsafe {
            std::slice::from_raw_parts_mut(
                self.lines.as_mut_ptr().cast::<u32>(),
                self.lines.len() * LINE_WORDS,
            )
        }
    }

    #[inline]
    pub fn get(&self, index: usize) -> BucketRef<'_> {
        self.record(index);
        let (cells, start) = (self.cells, index * self.stride);
        let w = &self.words()[start..start + 2 * cells + 1];
        BucketRef {
            keys: &w[..cells],
            counters: &w[cells..2 * cells],
            vote_minus: w[2 * cells],
        }
    }

    /// [`probe`] applied to bucket `index`.
    #[inline(always)]
    pub fn probe(&self, index: usize, key: u32) -> Option<usize> {
        self.record(index);
        if self.stride == LINE_WORDS {
            probe_line(&self.lines[index].0, key)
        } else {
            probe(self.get(index).keys, key)
        }
    }

    #[inline]
    pub fn get_mut(&mut self, index: usize) -> BucketMut<'_> {
        self.record(index);
        let (cells, start) = (self.cells, index * self.stride);
        let w = &mut self.words_mut()[start..start + 2 * cells + 1];
        let (keys, rest) = w.split_at_mut(cells);
        let (counters, vote_minus) = rest.split_at_mut(cells);
        BucketMut {
            keys,
            counters,
            vote_minus: &mut vote_minus[0],
        }
    }
}

/// First cell that holds `key` or is empty.
///
/// Because occupied cells form a prefix and keys are unique within a bucket,
/// this is the hit cell if `key` is present and the insertion point
/// otherwise.
#[inline]
pub(crate) fn probe(keys: &[u32], key: u32) -> Option<usize> {
    keys.iter().position(|&k| k == key || k == EMPTY_KEY)
}

/// [`probe`] over a full cache line: the eight leading words are compared
/// at once and the lane past the last key is masked off.
#[inline]
fn probe_line(line: &[u32; LINE_WORDS], key: u32) -> Option<usize> {
    let mask = line_match_mask(line, key) & ((1 << CACHE_LINE_CELLS) - 1);
    (mask != 0).then(|| mask.trailing_zeros() as usize)
}

#[cfg(target_arch = "x86_64")]
#[inline(always)]
fn line_match_mask(line: &[u32; LINE_WORDS], key: u32) -> u32 {
    use std::arch::x86_64::*;
    // SAFETY: SSE2 is part of the x86_64 baseline, and both unaligned loads
    // read within the 64-byte line.
    unsafe {
        let p = line.as_ptr().cast::<__m128i>();
        let (lo, hi) = (_mm_loadu_si128(p), _mm_loadu_si128(p.add(1)));
        let k = _mm_set1_epi32(key as i32);
        let z = _mm_setzero_si128();
        let lo = _mm_or_si128(_mm_cmpeq_epi32(lo, k), _mm_cmpeq_epi32(lo, z));
        let hi = _mm_or_si128(_mm_cmpeq_epi32(hi, k), _mm_cmpeq_epi32(hi, z));
        let lo = _mm_movemask_ps(_mm_castsi128_ps(lo)) as u32;
        let hi = _mm_movemask_ps(_mm_castsi128_ps(hi)) as u32;
        lo | (hi << 4)
    }
}

#[cfg(not(target_arch = "x86_64"))]
#[inline(always)]
fn line_match_mask(line: &[u32; LINE_WORDS], key: u32) -> u32 {
    line[..8].iter().enumerate().fold(0, |m, (i, &k)| {
        m | (u32::from(k == key || k == EMPTY_KEY) << i)
    })
}

/// Index and value of the smallest element; ties go to the lowest index.
#[inline]
pub(crate) fn min_cell(values: impl Iterator<Item = u32>) -> (usize, u32) {
    let mut best = (0, u32::MAX);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn footprints() {
        assert_eq!(bucket_footprint_bytes(7), 64);
        assert_eq!(bucket_footprint_bytes(4), 36);
        assert_eq!(bucket_footprint_bytes(1), 12);
        assert_eq!(std::mem::size_of::<Line>(), 64);
        assert_eq!(std::mem::align_of::<Line>(), 64);
    }

    #[test]
    fn seven_cell_buckets_are_line_aligned() {
        let arr = BucketArray::with_budget(64 * 10, 7).unwrap();
        assert_eq!(arr.len(), 10);
        for b in 0..10 {
            let addr = arr.get(b).keys.as_ptr() as usize;
            assert_eq!(addr % 64, 0);
        }
    }

    #[test]
    fn buckets_do_not_overlap() {
        for cells in [1, 3, 7, 8] {
            let mut arr =
                BucketArray::with_budget(bucket_footprint_bytes(cells) * 5, cells).unwrap();
            for b in 0..5 {
                let m = arr.get_mut(b);
                m.keys.iter_mut().for_each(|k| *k = b as u32 + 1);
                m.counters.iter_mut().for_each(|c| *c = 100 + b as u32);
                *m.vote_minus = 1000 + b as u32;
            }
            for b in 0..5 {
                let r = arr.get(b);
                assert!(r.keys.iter().all(|&k| k == b as u32 + 1));
                assert!(r.counters.iter().all(|&c| c == 100 + b as u32));
                assert_eq!(r.vote_minus, 1000 + b as u32);
            }
        }
    }

    #[test]
    fn probe_finds_hit_or_first_empty() {
        let line = |keys: [u32; 7]| {
            let mut w = [u32::MAX; LINE_WORDS];
            w[..7].copy_from_slice(&keys);
            w[7] = 8;
            w
        };
        assert_eq!(probe_line(&line([5, 6, 7, 0, 0, 0, 0]), 6), Some(1));
        assert_eq!(probe_line(&line([5, 6, 7, 0, 0, 0, 0]), 9), Some(3));
        assert_eq!(probe_line(&line([1, 2, 3, 4, 5, 6, 7]), 7), Some(6));
        assert_eq!(probe_line(&line([1, 2, 3, 4, 5, 6, 7]), 8), None);
        assert_eq!(probe(&[5, 6, 7, 0, 0, 0, 0], 6), Some(1));
        assert_eq!(probe(&[5, 6, 7, 0, 0, 0, 0], 9), Some(3));
        assert_eq!(probe(&[1, 2, 3, 4, 5, 6, 7], 7), Some(6));
        assert_eq!(probe(&[1, 2, 3, 4, 5, 6, 7], 8), None);
        assert_eq!(probe(&[1, 2, 0], 2), Some(1));
        assert_eq!(probe(&[1, 2, 3], 4), None);
        assert_eq!(probe(&[], 4), None);
    }

    #[test]
    fn budget_boundaries() {
        assert!(BucketArray::with_budget(63, 7).is_err());
        assert_eq!(BucketArray::with_budget(64, 7).unwrap().len(), 1);
        assert!(BucketArray::with_budget(1000, 0).is_err());
    }

    #[test]
    fn min_ties_go_to_lowest_index() {
        assert_eq!(min_cell([5, 3, 3, 9].into_iter()), (1, 3));
        assert_eq!(min_cell([2].into_iter()), (0, 2));
    }
}
