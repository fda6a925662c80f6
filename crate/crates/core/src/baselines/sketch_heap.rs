//! Count-Min and Count sketches paired with a top-k min-heap.
//!
//! After every insertion the flow's fresh estimate is offered to the heap:
//! it is updated in place when already tracked, appended while the heap has
//! room, and otherwise replaces the heap minimum only if strictly larger.
//! Reports re-query the sketch for every heap entry.

use serde::{Deserialize, Serialize};

use super::heap::TopKHeap;
use crate::error::{Error, Result};
use crate::hash::{HashFamily, Modulus};
use crate::sketch::{HeavyHitterReport, HeavyHitterSketch};
use crate::trace::FlowKey;

/// Accounted bytes per heap node: key and count, 4 bytes each.
pub const HEAP_NODE_BYTES: usize = 8;
const COUNTER_BYTES: usize = 4;

/// Counter rows of a frequency sketch.
pub trait FrequencyRows: Clone {
    const NAME: &'static str;

    fn with_dimensions(rows: usize, width: usize, seed: u64) -> Result<Self>;

    fn add(&mut self, key: FlowKey);

    fn estimate(&self, key: FlowKey) -> u64;

    fn width(&self) -> usize;

    fn rows(&self) -> usize;
}

/// Count-Min rows: one unsigned counter per row, estimate is the minimum.
#[derive(Debug, Clone)]
pub struct CountMinRows {
    counters: Vec<u32>,
    width: usize,
    range: Modulus,
    hash: HashFamily,
}

impl CountMinRows {
    pub fn counter(&self, row: usize, index: usize) -> u32 {
        self.counters[row * self.width + index]
    }

    pub fn index(&self, row: usize, key: FlowKey) -> usize {
        self.hash.index_in(row, key, &self.range)
    }
}

impl FrequencyRows for CountMinRows {
    const NAME: &'static str = "cm-heap";

    fn with_dimensions(rows: usize, width: usize, seed: u64) -> Result<Self> {
        if width == 0 {
            return Err(Error::param("width", "must be positive"));
        }
        Ok(Self {
            counters: vec![0; rows * width],
            width,
            range: Modulus::new(width),
            hash: HashFamily::new(seed, rows)?,
        })
    }

    #[inline]
    fn add(&mut self, key: FlowKey) {
        for row in 0..self.hash.row_count() {
            let i = row * self.width + self.hash.index_in(row, key, &self.range);
            self.counters[i] = self.counters[i].saturating_add(1);
        }
    }

    #[inline]
    fn estimate(&self, key: FlowKey) -> u64 {
        (0..self.hash.row_count())
            .map(|row| self.counter(row, self.index(row, key)))
            .min()
            .map_or(0, u64::from)
    }

    fn width(&self) -> usize {
        self.width
    }

    fn rows(&self) -> usize {
        self.hash.row_count()
    }
}

/// Count sketch rows: signed counters updated by a per-row ±1 hash,
/// estimate is the median of the signed row readings, clamped at zero.
#[derive(Debug, Clone)]
pub struct CountRows {
    counters: Vec<i32>,
    width: usize,
    range: Modulus,
    rows: usize,
    // rows [0, r) index, rows [r, 2r) sign
    hash: HashFamily,
}

impl CountRows {
    pub fn index(&self, row: usize, key: FlowKey) -> usize {
        self.hash.index_in(row, key, &self.range)
    }

    pub fn sign(&self, row: usize, key: FlowKey) -> i64 {
        if self.hash.hash64(self.rows + row, key) >> 63 == 0 {
            1
        } else {
            -1
        }
    }

    /// Signed reading of `key` in `row`.
    pub fn reading(&self, row: usize, key: FlowKey) -> i64 {
        self.sign(row, key) * i64::from(self.counters[row * self.width + self.index(row, key)])
    }
}

impl FrequencyRows for CountRows {
    const NAME: &'static str = "count-heap";

    fn with_dimensions(rows: usize, width: usize, seed: u64) -> Result<Self> {
        if width == 0 {
            return Err(Error::param("width", "must be positive"));
        }
        if rows == 0 {
            return Err(Error::param("rows", "must be positive"));
        }
        Ok(Self {
            counters: vec![0; rows * width],
            width,
            range: Modulus::new(width),
            rows,
            hash: HashFamily::new(seed, 2 * rows)?,
        })
    }

    #[inline]
    fn add(&mut self, key: FlowKey) {
        for row in 0..self.rows {
            let i = row * self.width + self.index(row, key);
            self.counters[i] = self.counters[i].saturating_add(self.sign(row, key) as i32);
        }
    }

    fn estimate(&self, key: FlowKey) -> u64 {
        let mut readings = [0i64; 16];
        let readings: &mut [i64] = if self.rows <= readings.len() {
            &mut readings[..self.rows]
        } else {
            return median(
                &mut (0..self.rows)
                    .map(|r| self.reading(r, key))
                    .collect::<Vec<_>>(),
            );
        };
        for (row, slot) in readings.iter_mut().enumerate() {
            *slot = self.reading(row, key);
        }
        median(readings)
    }

    fn width(&self) -> usize {
        self.width
    }

    fn rows(&self) -> usize {
        self.rows
    }
}

/// Median of the readings, averaging the middle pair for even counts;
/// negative medians read as 0.
fn median(values: &mut [i64]) -> u64 {
    values.sort_unstable();
    let n = values.len();
    let m = if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2
    };
    m.max(0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchHeapConfig {
    pub rows: usize,
    pub heap_capacity: usize,
    /// Charge the heap's nodes against the memory budget.
    pub heap_in_budget: bool,
}

impl Default for SketchHeapConfig {
    fn default() -> Self {
        Self {
            rows: 3,
            heap_capacity: 4096,
            heap_in_budget: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SketchHeap<R> {
    sketch: R,
    heap: TopKHeap,
}

pub type CmHeap = SketchHeap<CountMinRows>;
pub type CountHeap = SketchHeap<CountRows>;

impl<R: FrequencyRows> SketchHeap<R> {
    /// Row width is whatever fits in the budget after the heap (when charged):
    /// `(memory - heap_capacity * 8) / (rows * 4)`.
    pub fn with_memory(memory_bytes: usize, config: SketchHeapConfig, seed: u64) -> Result<Self> {
        if config.rows == 0 {
            return Err(Error::param("rows", "must be positive"));
        }
        let heap_bytes = if config.heap_in_budget {
            config.heap_capacity * HEAP_NODE_BYTES
        } else {
            0
        };
        let width = memory_bytes.saturating_sub(heap_bytes) / (config.rows * COUNTER_BYTES);
        if width == 0 {
            return Err(Error::MemoryTooSmall {
                memory_bytes,
                message: format!(
                    "{heap_bytes} bytes of heap leave no room for {} rows of counters",
                    config.rows
                ),
            });
        }
        Self::with_dimensions(config.rows, width, config.heap_capacity, seed)
    }

    pub fn with_dimensions(
        rows: usize,
        width: usize,
        heap_capacity: usize,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            sketch: R::with_dimensions(rows, width, seed)?,
            heap: TopKHeap::new(heap_capacity),
        })
    }

    pub fn sketch(&self) -> &R {
        &self.sketch
    }

    pub fn width(&self) -> usize {
        self.sketch.width()
    }

    pub fn heap_len(&self) -> usize {
        self.heap.len()
    }

    /// Smallest estimate held by the heap, as last offered.
    pub fn heap_min(&self) -> Option<u64> {
        self.heap.min().map(|(e, _)| e)
    }

    pub fn tracks(&self, key: FlowKey) -> bool {
        self.heap.contains(key)
    }

    /// Heap entries with the estimates they were last offered at.
    pub fn heap_entries(&self) -> impl Iterator<Item = (FlowKey, u64)> + '_ {
        self.heap.iter().map(|(e, k)| (k, e))
    }

    #[inline]
    pub fn insert(&mut self, key: FlowKey) {
        self.sketch.add(key);
        let estimate = self.sketch.estimate(key);
        self.heap.offer(key, estimate);
    }

    pub fn query(&self, key: FlowKey) -> u64 {
        self.sketch.estimate(key)
    }

    /// Heap members whose current sketch estimate is at least `threshold`,
    /// largest first.
    pub fn report(&self, threshold: u64) -> HeavyHitterReport {
        let mut hits: Vec<_> = self
            .heap
            .iter()
            .map(|(_, key)| (key, self.sketch.estimate(key)))
            .filter(|&(_, e)| e >= threshold)
            .collect();
        hits.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        hits.into_iter().collect()
    }
}

impl<R: FrequencyRows> HeavyHitterSketch for SketchHeap<R> {
    #[inline]
    fn insert(&mut self, key: FlowKey) {
        SketchHeap::insert(self, key)
    }

    fn query(&self, key: FlowKey) -> u64 {
        SketchHeap::query(self, key)
    }

    fn report(&self, threshold: u64) -> HeavyHitterReport {
        SketchHeap::report(self, threshold)
    }

    fn name(&self) -> &'static str {
        R::NAME
    }
}
